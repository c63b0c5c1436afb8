#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace bikerisk {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Library version string, embedded in output provenance.
std::string_view version();

}  // namespace bikerisk

#pragma once

#include <filesystem>
#include <string>

namespace locrank::io {

// Reads a whole file as bytes. Throws InputError if unreadable.
std::string read_file(const std::filesystem::path& path);

// Writes bytes, replacing any existing file. Throws InputError on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace locrank::io

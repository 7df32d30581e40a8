#include "locrank/io.hpp"

#include "locrank/errors.hpp"

#include <fstream>

namespace locrank::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open file: " + path.string());
    }
    std::string out;
    in.seekg(0, std::ios::end);
    auto size = in.tellg();
    if (size < 0) {
        throw InputError("cannot stat file: " + path.string());
    }
    out.resize(static_cast<std::size_t>(size));
    in.seekg(0, std::ios::beg);
    if (size > 0) {
        in.read(out.data(), size);
        if (!in) {
            throw InputError("short read: " + path.string());
        }
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for writing: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw InputError("short write: " + path.string());
    }
}

} // namespace locrank::io

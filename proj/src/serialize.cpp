#include "fvrank/serialize.hpp"

#include <fstream>

namespace fvr {

Fnv1a64& Fnv1a64::update_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot read '" + path.string() + "' while hashing inputs");
    char buffer[1 << 14];
    while (in) {
        in.read(buffer, sizeof buffer);
        update(buffer, static_cast<std::size_t>(in.gcount()));
    }
    return *this;
}

} // namespace fvr

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"

namespace tabrep::dataio {

/// Self-describing binary container of named blocks, used for encoder models
/// and embedding tables. Little-endian throughout. Layout (documented in the
/// README):
///   magic "TRMC", u32 version, u64 block count,
///   then per block: u32 name length, name bytes, u8 tag,
///     tag 0 (matrix): u64 rows, u64 cols, rows*cols f64
///     tag 1 (string): u64 length, bytes
///     tag 2 (i64):    i64 value
struct ModelContainer {
    using Value = std::variant<numkit::Matrix, std::string, std::int64_t>;
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, Value> blocks;

    void put(const std::string& name, numkit::Matrix m) { blocks[name] = std::move(m); }
    void put(const std::string& name, std::string s) { blocks[name] = std::move(s); }
    void put(const std::string& name, std::int64_t v) { blocks[name] = v; }

    bool has(const std::string& name) const { return blocks.count(name) > 0; }

    const numkit::Matrix& get_matrix(const std::string& name) const { return get<numkit::Matrix>(name); }
    const std::string& get_string(const std::string& name) const { return get<std::string>(name); }
    std::int64_t get_i64(const std::string& name) const { return get<std::int64_t>(name); }

private:
    template <typename T>
    const T& get(const std::string& name) const {
        auto it = blocks.find(name);
        if (it == blocks.end()) throw FormatError("model container: missing block '" + name + "'");
        if (const T* v = std::get_if<T>(&it->second)) return *v;
        throw FormatError("model container: block '" + name + "' has the wrong type");
    }
};

namespace detail {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError("model container: truncated file");
    return v;
}

} // namespace detail

inline void save_container(const ModelContainer& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write("TRMC", 4);
    detail::write_raw(out, ModelContainer::kVersion);
    detail::write_raw(out, static_cast<std::uint64_t>(c.blocks.size()));
    for (const auto& [name, value] : c.blocks) {
        detail::write_raw(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        if (const auto* m = std::get_if<numkit::Matrix>(&value)) {
            detail::write_raw(out, static_cast<std::uint8_t>(0));
            detail::write_raw(out, static_cast<std::uint64_t>(m->rows()));
            detail::write_raw(out, static_cast<std::uint64_t>(m->cols()));
            out.write(reinterpret_cast<const char*>(m->data().data()),
                      static_cast<std::streamsize>(m->size() * sizeof(double)));
        } else if (const auto* s = std::get_if<std::string>(&value)) {
            detail::write_raw(out, static_cast<std::uint8_t>(1));
            detail::write_raw(out, static_cast<std::uint64_t>(s->size()));
            out.write(s->data(), static_cast<std::streamsize>(s->size()));
        } else {
            detail::write_raw(out, static_cast<std::uint8_t>(2));
            detail::write_raw(out, std::get<std::int64_t>(value));
        }
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline ModelContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TRMC", 4) != 0)
        throw FormatError("'" + path + "': not a model container (bad magic)");
    const auto version = detail::read_raw<std::uint32_t>(in);
    if (version != ModelContainer::kVersion)
        throw FormatError("'" + path + "': container version " + std::to_string(version) +
                          ", expected " + std::to_string(ModelContainer::kVersion));
    const auto count = detail::read_raw<std::uint64_t>(in);
    ModelContainer c;
    for (std::uint64_t b = 0; b < count; ++b) {
        const auto name_len = detail::read_raw<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw FormatError("model container: truncated file");
        const auto tag = detail::read_raw<std::uint8_t>(in);
        if (tag == 0) {
            const auto rows = detail::read_raw<std::uint64_t>(in);
            const auto cols = detail::read_raw<std::uint64_t>(in);
            numkit::Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
            in.read(reinterpret_cast<char*>(m.data().data()),
                    static_cast<std::streamsize>(m.size() * sizeof(double)));
            if (!in) throw FormatError("model container: truncated matrix block '" + name + "'");
            c.blocks[name] = std::move(m);
        } else if (tag == 1) {
            const auto len = detail::read_raw<std::uint64_t>(in);
            std::string s(static_cast<std::size_t>(len), '\0');
            in.read(s.data(), static_cast<std::streamsize>(len));
            if (!in) throw FormatError("model container: truncated string block '" + name + "'");
            c.blocks[name] = std::move(s);
        } else if (tag == 2) {
            c.blocks[name] = detail::read_raw<std::int64_t>(in);
        } else {
            throw FormatError("model container: unknown block tag " + std::to_string(tag));
        }
    }
    return c;
}

} // namespace tabrep::dataio

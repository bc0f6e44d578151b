#include "biocl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace biocl {

namespace {

constexpr char kMagic[8] = {'B', 'I', 'O', 'C', 'L', 'K', 'V', '1'};

template <class T>
void append_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

std::uint64_t read_le64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t read_le32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void ArchiveWriter::put_matrix(const std::string& key, const Matrix& m) {
    Entry e;
    e.dtype = 0;
    e.rows = static_cast<std::uint64_t>(m.rows());
    e.cols = static_cast<std::uint64_t>(m.cols());
    e.payload.reserve(m.size() * 8);
    for (real v : m.flat()) {
        const double d = static_cast<double>(v);
        append_le(e.payload, std::bit_cast<std::uint64_t>(d));
    }
    entries_[key] = std::move(e);
}

void ArchiveWriter::put_ints(const std::string& key, const std::vector<std::int64_t>& v) {
    Entry e;
    e.dtype = 1;
    e.rows = v.size();
    e.cols = 1;
    e.payload.reserve(v.size() * 8);
    for (auto x : v) append_le(e.payload, static_cast<std::uint64_t>(x));
    entries_[key] = std::move(e);
}

void ArchiveWriter::put_string(const std::string& key, const std::string& s) {
    Entry e;
    e.dtype = 2;
    e.rows = s.size();
    e.cols = 1;
    e.payload.assign(s.begin(), s.end());
    entries_[key] = std::move(e);
}

void ArchiveWriter::save(const std::string& path) const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    append_le(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [key, e] : entries_) {
        append_le(out, static_cast<std::uint32_t>(key.size()));
        out.insert(out.end(), key.begin(), key.end());
        out.push_back(e.dtype);
        append_le(out, e.rows);
        append_le(out, e.cols);
        append_le(out, static_cast<std::uint64_t>(e.payload.size()));
        out.insert(out.end(), e.payload.begin(), e.payload.end());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("ArchiveWriter: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("ArchiveWriter: write failed for " + path);
}

ArchiveReader::ArchiveReader(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("ArchiveReader: cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 8) != 0) {
        throw std::runtime_error("ArchiveReader: bad magic in " + path);
    }
    std::size_t pos = 8;
    const std::uint32_t count = read_le32(buf.data() + pos);
    pos += 4;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto need = [&](std::size_t n) {
            if (pos + n > buf.size()) {
                throw std::runtime_error("ArchiveReader: truncated archive " + path);
            }
        };
        need(4);
        const std::uint32_t klen = read_le32(buf.data() + pos);
        pos += 4;
        need(klen);
        std::string key(reinterpret_cast<const char*>(buf.data() + pos), klen);
        pos += klen;
        need(1 + 24);
        Entry e;
        e.dtype = buf[pos];
        pos += 1;
        e.rows = read_le64(buf.data() + pos);
        pos += 8;
        e.cols = read_le64(buf.data() + pos);
        pos += 8;
        const std::uint64_t plen = read_le64(buf.data() + pos);
        pos += 8;
        need(plen);
        e.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                         buf.begin() + static_cast<std::ptrdiff_t>(pos + plen));
        pos += plen;
        entries_[key] = std::move(e);
    }
}

bool ArchiveReader::has(const std::string& key) const { return entries_.count(key) > 0; }

const ArchiveReader::Entry& ArchiveReader::at(const std::string& key, std::uint8_t dtype) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("ArchiveReader: missing key " + key);
    if (it->second.dtype != dtype) {
        throw std::runtime_error("ArchiveReader: wrong type for key " + key);
    }
    return it->second;
}

Matrix ArchiveReader::matrix(const std::string& key) const {
    const auto& e = at(key, 0);
    Matrix m(static_cast<int>(e.rows), static_cast<int>(e.cols));
    auto flat = m.flat();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        flat[i] = static_cast<real>(std::bit_cast<double>(read_le64(e.payload.data() + i * 8)));
    }
    return m;
}

std::vector<std::int64_t> ArchiveReader::ints(const std::string& key) const {
    const auto& e = at(key, 1);
    std::vector<std::int64_t> v(e.rows);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<std::int64_t>(read_le64(e.payload.data() + i * 8));
    }
    return v;
}

std::string ArchiveReader::string(const std::string& key) const {
    const auto& e = at(key, 2);
    return std::string(e.payload.begin(), e.payload.end());
}

std::vector<std::string> ArchiveReader::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
}

}  // namespace biocl

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "biocl/matrix.hpp"

namespace biocl {

/// Self-describing little-endian key/value archive: the checkpoint
/// container. Matrices are stored as f64 regardless of the build's real
/// type; integer vectors and raw byte strings round-trip losslessly.
class ArchiveWriter {
public:
    void put_matrix(const std::string& key, const Matrix& m);
    void put_ints(const std::string& key, const std::vector<std::int64_t>& v);
    void put_string(const std::string& key, const std::string& s);

    void save(const std::string& path) const;

private:
    struct Entry {
        std::uint8_t dtype;  // 0 = f64 matrix, 1 = i64 vector, 2 = bytes
        std::uint64_t rows, cols;
        std::vector<std::uint8_t> payload;
    };
    std::map<std::string, Entry> entries_;
};

class ArchiveReader {
public:
    explicit ArchiveReader(const std::string& path);

    bool has(const std::string& key) const;
    Matrix matrix(const std::string& key) const;
    std::vector<std::int64_t> ints(const std::string& key) const;
    std::string string(const std::string& key) const;
    std::vector<std::string> keys() const;

private:
    struct Entry {
        std::uint8_t dtype;
        std::uint64_t rows, cols;
        std::vector<std::uint8_t> payload;
    };
    const Entry& at(const std::string& key, std::uint8_t dtype) const;
    std::map<std::string, Entry> entries_;
};

}  // namespace biocl

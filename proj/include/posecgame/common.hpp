#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace posecgame {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Error with a source position (1-based line/column), thrown by the parsers.
class ParseError : public Error {
  public:
    ParseError(const std::string& message, int line, int col)
        : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
          line_(line), col_(col), message_(message) {}

    int line() const { return line_; }
    int col() const { return col_; }
    const std::string& message() const { return message_; }

  private:
    int line_;
    int col_;
    std::string message_;
};

/// Fixed-width bit vector used for packed boolean valuations.
/// Width is set once; equality and hashing consider all bits up to the width.
class BitVec {
  public:
    BitVec() = default;
    explicit BitVec(std::size_t nbits)
        : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

    std::size_t size() const { return nbits_; }

    bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

    void set(std::size_t i, bool v) {
        uint64_t mask = uint64_t(1) << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }

    bool operator==(const BitVec& o) const {
        return nbits_ == o.nbits_ && words_ == o.words_;
    }
    bool operator!=(const BitVec& o) const { return !(*this == o); }

    bool operator<(const BitVec& o) const {
        if (nbits_ != o.nbits_) return nbits_ < o.nbits_;
        return words_ < o.words_;
    }

    std::size_t hash() const {
        std::size_t h = nbits_;
        for (uint64_t w : words_) h = h * 1099511628211ULL + std::size_t(w);
        return h;
    }

  private:
    std::size_t nbits_ = 0;
    std::vector<uint64_t> words_;
};

struct BitVecHash {
    std::size_t operator()(const BitVec& b) const { return b.hash(); }
};

/// Number of worker threads to use, capped by the POSECGAME_THREADS
/// environment variable when set.
unsigned worker_count();

/// Chunked parallel index loop. The body must write only to its own slots;
/// results are identical for any worker count. Exceptions from workers are
/// rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t serial_threshold = 16384);

}  // namespace posecgame

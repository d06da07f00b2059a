#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deepglstm {

inline constexpr std::size_t kDefaultSequenceLength = 1000;
inline constexpr std::size_t kResidueVocabulary = 27;  // padding + A..Z

class InvalidResidue : public std::invalid_argument {
public:
    InvalidResidue(char c, std::size_t position)
        : std::invalid_argument("invalid residue '" + std::string(1, c) + "' at position " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Fixed-length protein encoding: A..Z -> 1..26, 0 = padding (contiguous suffix).
struct TokenSequence {
    std::vector<std::int32_t> tokens;

    std::size_t length() const { return tokens.size(); }
    bool operator==(const TokenSequence&) const = default;
};

/// Letter tokens of `sequence` (case-insensitive), truncated to the first `n`
/// residues and right-padded with zeros to exactly `n`.
inline TokenSequence tokenize(std::string_view sequence, std::size_t n = kDefaultSequenceLength) {
    TokenSequence out{std::vector<std::int32_t>(n, 0)};
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        const auto c = static_cast<unsigned char>(sequence[i]);
        if (!std::isalpha(c) || c > 127) throw InvalidResidue(sequence[i], i);
        if (i < n) out.tokens[i] = std::toupper(c) - 'A' + 1;
    }
    return out;
}

/// Uppercase residues with padding dropped.
inline std::string detokenize(const TokenSequence& seq) {
    std::string s;
    for (auto t : seq.tokens) {
        if (t == 0) break;
        s.push_back(static_cast<char>('A' + t - 1));
    }
    return s;
}

}  // namespace deepglstm

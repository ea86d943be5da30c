#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "circledyn/mobius.hpp"

namespace circledyn {

struct Letter {
    std::uint8_t gen = 0;
    bool inv = false;

    Letter inverse() const { return {gen, !inv}; }
    // 2*gen + inv; dense index into per-letter tables.
    int code() const { return 2 * gen + (inv ? 1 : 0); }
    static Letter from_code(int c) { return {static_cast<std::uint8_t>(c / 2), (c % 2) == 1}; }
    char to_char() const { return static_cast<char>((inv ? 'A' : 'a') + gen); }
    static Letter from_char(char ch);
    bool operator==(const Letter&) const = default;
};

// Reduced word; letters()[0] is applied first.
class ReducedWord {
public:
    ReducedWord() = default;
    // Throws NotReduced if an adjacent pair cancels.
    explicit ReducedWord(std::vector<Letter> letters);
    static ReducedWord reduce(const std::vector<Letter>& letters);
    // Text form "a B a a", applied left to right; "" or "id" is the identity.
    static ReducedWord parse(const std::string& text);

    const std::vector<Letter>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }
    const Letter& operator[](std::size_t i) const { return letters_[i]; }
    const Letter& first() const { return letters_.front(); }
    const Letter& last() const { return letters_.back(); }

    // Applies l after the word, cancelling if needed.
    void append(Letter l);
    void pop_back() { letters_.pop_back(); }
    ReducedWord inverse() const;
    // Word made of the first k applied letters.
    ReducedWord prefix(std::size_t k) const;

    std::string to_string() const;
    // Compact key without separators.
    std::string key() const;

    bool operator==(const ReducedWord&) const = default;

private:
    std::vector<Letter> letters_;
};

// Shortest first, then lexicographic on the serialized text.
bool shortlex_less(const ReducedWord& a, const ReducedWord& b);

// g.h with h applied first.
ReducedWord concat(const ReducedWord& g, const ReducedWord& h);
// c^-1 then g then c: the conjugate c g c^-1 in composition notation.
ReducedWord conjugate(const ReducedWord& g, const ReducedWord& c);

// True iff g extends base (base applied first) by at least one letter.
bool in_cone(const ReducedWord& g, const ReducedWord& base);

std::uint64_t ball_size(int rank, int n);

// Depth-first enumeration of B(n) in preorder, identity first.
class BallEnumerator {
public:
    BallEnumerator(int rank, int n);
    bool next(ReducedWord& out);

private:
    int rank_, n_;
    bool started_ = false;
    std::vector<int> codes_;
};
std::vector<ReducedWord> ball_enumerate(int rank, int n);

struct GroupSystem {
    std::string label;
    std::vector<CircleDiffeo> generators;
    std::vector<CircleDiffeo> inverses;
    // False when the generators satisfy relations; ball sums then run over
    // distinct elements instead of reduced words.
    bool free = true;

    GroupSystem() = default;
    // Verifies each inverse round-trips to 1e-12 on a 100-point grid.
    GroupSystem(std::string label, std::vector<CircleDiffeo> gens, bool is_free = true);

    int rank() const { return static_cast<int>(generators.size()); }
    int letter_count() const { return 2 * rank(); }
    const CircleDiffeo& map(Letter l) const { return l.inv ? inverses[l.gen] : generators[l.gen]; }
    bool all_mobius() const;
    std::vector<Letter> letters() const;
};

struct WordEvaluation {
    ReducedWord word;
    CirclePoint base;
    CirclePoint image;
    double derivative = 1.0;
    // Sum over j = 0..n-1 of the derivative of the first j letters at base.
    double intermediate_derivative_sum = 1.0;
    std::vector<CirclePoint> intermediate_images;
};

WordEvaluation evaluate_word(const GroupSystem& sys, const ReducedWord& w, CirclePoint x,
                             bool keep_images = false);
CirclePoint apply_word(const GroupSystem& sys, const ReducedWord& w, CirclePoint x);
double word_derivative(const GroupSystem& sys, const ReducedWord& w, CirclePoint x);
// Image of an arc; orientation-reversing words swap the endpoints.
Arc word_image(const GroupSystem& sys, const ReducedWord& w, const Arc& a);
Arc diffeo_image(const CircleDiffeo& g, const Arc& a);

// Memoizes composed matrices of short words; safe for concurrent readers.
class MatrixCache {
public:
    explicit MatrixCache(std::size_t max_depth = 10) : max_depth_(max_depth) {}
    std::optional<MobiusTransform> find(const std::string& key) const;
    void insert(const std::string& key, const MobiusTransform& m);
    std::size_t max_depth() const { return max_depth_; }
    std::size_t size() const;

private:
    std::size_t max_depth_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, MobiusTransform> table_;
};

// Composed matrix of a word over Möbius generators; throws InvalidArgument otherwise.
MobiusTransform word_matrix(const GroupSystem& sys, const ReducedWord& w, MatrixCache* cache = nullptr);

}  // namespace circledyn

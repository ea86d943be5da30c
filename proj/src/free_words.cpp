#include "circledyn/free_words.hpp"

#include <cctype>
#include <cmath>
#include <mutex>
#include <sstream>

#include "circledyn/errors.hpp"

namespace circledyn {

Letter Letter::from_char(char ch) {
    if (ch >= 'a' && ch <= 'z') return {static_cast<std::uint8_t>(ch - 'a'), false};
    if (ch >= 'A' && ch <= 'Z') return {static_cast<std::uint8_t>(ch - 'A'), true};
    throw ParseError(std::string("invalid letter '") + ch + "'");
}

ReducedWord::ReducedWord(std::vector<Letter> letters) : letters_(std::move(letters)) {
    for (std::size_t i = 1; i < letters_.size(); ++i)
        if (letters_[i] == letters_[i - 1].inverse())
            throw NotReduced("adjacent letters cancel at position " + std::to_string(i));
}

ReducedWord ReducedWord::reduce(const std::vector<Letter>& letters) {
    ReducedWord w;
    for (const Letter& l : letters) w.append(l);
    return w;
}

ReducedWord ReducedWord::parse(const std::string& text) {
    std::vector<Letter> ls;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        if (tok == "id") continue;
        for (char ch : tok) ls.push_back(Letter::from_char(ch));
    }
    return ReducedWord(std::move(ls));
}

void ReducedWord::append(Letter l) {
    if (!letters_.empty() && letters_.back() == l.inverse())
        letters_.pop_back();
    else
        letters_.push_back(l);
}

ReducedWord ReducedWord::inverse() const {
    ReducedWord w;
    w.letters_.reserve(letters_.size());
    for (auto it = letters_.rbegin(); it != letters_.rend(); ++it) w.letters_.push_back(it->inverse());
    return w;
}

ReducedWord ReducedWord::prefix(std::size_t k) const {
    ReducedWord w;
    w.letters_.assign(letters_.begin(), letters_.begin() + static_cast<long>(std::min(k, letters_.size())));
    return w;
}

std::string ReducedWord::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < letters_.size(); ++i) {
        if (i) s.push_back(' ');
        s.push_back(letters_[i].to_char());
    }
    return s;
}

std::string ReducedWord::key() const {
    std::string s;
    s.reserve(letters_.size());
    for (const Letter& l : letters_) s.push_back(l.to_char());
    return s;
}

bool shortlex_less(const ReducedWord& a, const ReducedWord& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.key() < b.key();
}

ReducedWord concat(const ReducedWord& g, const ReducedWord& h) {
    ReducedWord out = h;
    for (const Letter& l : g.letters()) out.append(l);
    return out;
}

ReducedWord conjugate(const ReducedWord& g, const ReducedWord& c) {
    return concat(c, concat(g, c.inverse()));
}

bool in_cone(const ReducedWord& g, const ReducedWord& base) {
    if (base.empty()) throw EmptyBase("cone base must be nonempty");
    if (g.size() <= base.size()) return false;
    for (std::size_t i = 0; i < base.size(); ++i)
        if (!(g[i] == base[i])) return false;
    return true;
}

std::uint64_t ball_size(int rank, int n) {
    if (n < 0) throw InvalidArgument("ball radius must be >= 0");
    std::uint64_t total = 1, sphere = 0;
    for (int k = 1; k <= n; ++k) {
        sphere = (k == 1) ? static_cast<std::uint64_t>(2 * rank) : sphere * static_cast<std::uint64_t>(2 * rank - 1);
        total += sphere;
    }
    return total;
}

BallEnumerator::BallEnumerator(int rank, int n) : rank_(rank), n_(n) {
    if (n < 0) throw InvalidArgument("ball radius must be >= 0");
    if (rank < 1) throw InvalidArgument("rank must be >= 1");
}

bool BallEnumerator::next(ReducedWord& out) {
    const int letters = 2 * rank_;
    auto valid = [&](std::size_t pos, int c) {
        return pos == 0 || c != (codes_[pos - 1] ^ 1);
    };
    auto emit = [&] {
        std::vector<Letter> ls;
        ls.reserve(codes_.size());
        for (int c : codes_) ls.push_back(Letter::from_code(c));
        out = ReducedWord(std::move(ls));
        return true;
    };
    if (!started_) {
        started_ = true;
        out = ReducedWord();
        return true;
    }
    if (static_cast<int>(codes_.size()) < n_) {
        int c = 0;
        while (!valid(codes_.size(), c)) ++c;
        codes_.push_back(c);
        return emit();
    }
    while (!codes_.empty()) {
        std::size_t pos = codes_.size() - 1;
        int c = codes_.back() + 1;
        while (c < letters && !valid(pos, c)) ++c;
        if (c < letters) {
            codes_.back() = c;
            return emit();
        }
        codes_.pop_back();
    }
    return false;
}

std::vector<ReducedWord> ball_enumerate(int rank, int n) {
    std::vector<ReducedWord> out;
    out.reserve(ball_size(rank, n));
    BallEnumerator e(rank, n);
    ReducedWord w;
    while (e.next(w)) out.push_back(w);
    return out;
}

GroupSystem::GroupSystem(std::string lbl, std::vector<CircleDiffeo> gens, bool is_free)
    : label(std::move(lbl)), generators(std::move(gens)), free(is_free) {
    if (generators.empty()) throw InvalidArgument("group needs at least one generator");
    if (generators.size() > 26) throw InvalidArgument("at most 26 generators are supported");
    for (const auto& g : generators) {
        inverses.push_back(circledyn::inverse(g));
        for (int i = 0; i < 100; ++i) {
            CirclePoint p((i + 0.5) / 100.0);
            CirclePoint q = circledyn::eval(inverses.back(), circledyn::eval(g, p));
            if (circle_distance(p, q) > 1e-12)
                throw InvalidArgument("generator inverse fails the round-trip check");
        }
    }
}

bool GroupSystem::all_mobius() const {
    for (const auto& g : generators)
        if (!std::holds_alternative<MobiusTransform>(g)) return false;
    return true;
}

std::vector<Letter> GroupSystem::letters() const {
    std::vector<Letter> out;
    for (int c = 0; c < letter_count(); ++c) out.push_back(Letter::from_code(c));
    return out;
}

WordEvaluation evaluate_word(const GroupSystem& sys, const ReducedWord& w, CirclePoint x, bool keep_images) {
    WordEvaluation ev;
    ev.word = w;
    ev.base = x;
    CirclePoint p = x;
    double d = 1.0, sum = 0.0;
    if (keep_images) ev.intermediate_images.push_back(p);
    for (std::size_t j = 0; j < w.size(); ++j) {
        sum += d;
        const CircleDiffeo& g = sys.map(w[j]);
        d *= derivative(g, p);
        p = eval(g, p);
        if (keep_images) ev.intermediate_images.push_back(p);
    }
    ev.image = p;
    ev.derivative = d;
    ev.intermediate_derivative_sum = w.empty() ? 1.0 : sum;
    return ev;
}

CirclePoint apply_word(const GroupSystem& sys, const ReducedWord& w, CirclePoint x) {
    for (const Letter& l : w.letters()) x = eval(sys.map(l), x);
    return x;
}

double word_derivative(const GroupSystem& sys, const ReducedWord& w, CirclePoint x) {
    double d = 1.0;
    for (const Letter& l : w.letters()) {
        d *= derivative(sys.map(l), x);
        x = eval(sys.map(l), x);
    }
    return d;
}

namespace {
Arc oriented_image(CirclePoint s, CirclePoint e, int orient, const Arc& a) {
    if (a.full()) return Arc(s, 1.0);
    CirclePoint from = orient > 0 ? s : e;
    CirclePoint to = orient > 0 ? e : s;
    double len = forward_distance(from, to);
    if (len == 0.0) len = 1.0;
    return Arc(from, len);
}
}  // namespace

Arc word_image(const GroupSystem& sys, const ReducedWord& w, const Arc& a) {
    int orient = 1;
    for (const Letter& l : w.letters()) orient *= orientation(sys.map(l));
    return oriented_image(apply_word(sys, w, a.start), apply_word(sys, w, a.end()), orient, a);
}

Arc diffeo_image(const CircleDiffeo& g, const Arc& a) {
    return oriented_image(eval(g, a.start), eval(g, a.end()), orientation(g), a);
}

std::optional<MobiusTransform> MatrixCache::find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

void MatrixCache::insert(const std::string& key, const MobiusTransform& m) {
    std::unique_lock lock(mutex_);
    table_.emplace(key, m);
}

std::size_t MatrixCache::size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
}

MobiusTransform word_matrix(const GroupSystem& sys, const ReducedWord& w, MatrixCache* cache) {
    if (!sys.all_mobius()) throw InvalidArgument("word_matrix needs Möbius generators");
    const bool cacheable = cache && w.size() <= cache->max_depth();
    std::string key;
    if (cacheable) {
        key = w.key();
        if (auto hit = cache->find(key)) return *hit;
    }
    MobiusTransform m;
    for (const Letter& l : w.letters()) m = compose(std::get<MobiusTransform>(sys.map(l)), m);
    if (cacheable) cache->insert(key, m);
    return m;
}

}  // namespace circledyn

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tangled/error.hpp"

namespace tangled {

using Index = std::uint32_t;

/// A bijection on {1..n}, stored as its image array: image()[i-1] = sigma(i).
class Permutation {
public:
    Permutation() = default;

    /// Validates that `image` is a bijection on {1..n}.
    explicit Permutation(std::vector<Index> image) : image_(std::move(image)) {
        detail::require(!image_.empty(), "permutation must have n >= 1");
        std::vector<bool> seen(image_.size() + 1, false);
        for (Index v : image_) {
            detail::require(v >= 1 && v <= image_.size() && !seen[v],
                            "permutation image must be a bijection on {1..n}");
            seen[v] = true;
        }
    }

    static Permutation identity(Index n) {
        detail::require(n >= 1, "permutation must have n >= 1");
        std::vector<Index> img(n);
        std::iota(img.begin(), img.end(), Index{1});
        return Permutation(std::move(img), unchecked_tag{});
    }

    static Permutation reversal(Index n) {
        detail::require(n >= 1, "permutation must have n >= 1");
        std::vector<Index> img(n);
        for (Index i = 0; i < n; ++i) img[i] = n - i;
        return Permutation(std::move(img), unchecked_tag{});
    }

    Index size() const noexcept { return static_cast<Index>(image_.size()); }

    /// sigma(i), 1-based.
    Index operator()(Index i) const { return image_[i - 1]; }

    std::span<const Index> image() const noexcept { return image_; }

    friend bool operator==(const Permutation&, const Permutation&) = default;
    friend auto operator<=>(const Permutation&, const Permutation&) = default;

private:
    struct unchecked_tag {};
    Permutation(std::vector<Index> image, unchecked_tag) : image_(std::move(image)) {}
    friend Permutation make_unchecked(std::vector<Index> image);

    std::vector<Index> image_;
};

/// For callers that construct bijections by design (process output, rank
/// transforms). Not validated.
inline Permutation make_unchecked(std::vector<Index> image) {
    return Permutation(std::move(image), Permutation::unchecked_tag{});
}

/// |{(i,j) : i < j, sigma(i) > sigma(j)}|, via a Fenwick tree in O(n log n).
inline std::uint64_t inversions(const Permutation& p) {
    const Index n = p.size();
    std::vector<Index> tree(n + 1, 0);
    std::uint64_t count = 0;
    for (Index i = n; i >= 1; --i) {
        // elements to the right of i that are smaller than sigma(i)
        for (Index x = p(i) - 1; x > 0; x -= x & (~x + 1)) count += tree[x];
        for (Index x = p(i); x <= n; x += x & (~x + 1)) ++tree[x];
    }
    return count;
}

/// sigma^R(i) = sigma(n + 1 - i).
inline Permutation reverse(const Permutation& p) {
    std::vector<Index> img(p.image().rbegin(), p.image().rend());
    return make_unchecked(std::move(img));
}

/// Rank transform of a sequence of distinct integers: smallest -> 1, ...
template <class T>
Permutation standardize(std::span<const T> w) {
    detail::require(!w.empty(), "standardize needs a nonempty sequence");
    std::vector<Index> order(w.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return w[a] < w[b]; });
    std::vector<Index> rank(w.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (r > 0) detail::require(w[order[r - 1]] != w[order[r]], "standardize requires distinct entries");
        rank[order[r]] = static_cast<Index>(r + 1);
    }
    return make_unchecked(std::move(rank));
}

template <class T>
Permutation standardize(const std::vector<T>& w) {
    return standardize(std::span<const T>(w));
}

namespace detail {

/// True when the window pi[start, start+k) is order-isomorphic to sigma.
/// Checks that the positions of 1..k in sigma pick out an increasing run.
inline bool window_matches(std::span<const Index> pi, std::size_t start, std::span<const Index> sigma_inverse) {
    const std::size_t k = sigma_inverse.size();
    for (std::size_t r = 1; r < k; ++r) {
        if (pi[start + sigma_inverse[r - 1]] > pi[start + sigma_inverse[r]]) return false;
    }
    return true;
}

}  // namespace detail

/// Smallest 1-based i with st(pi(i..i+k-1)) = sigma, or nullopt.
inline std::optional<Index> contains_consecutively(const Permutation& pi, const Permutation& sigma) {
    const Index n = pi.size();
    const Index k = sigma.size();
    detail::require(k <= n, "pattern longer than permutation");
    std::vector<Index> inv(k);
    for (Index i = 1; i <= k; ++i) inv[sigma(i) - 1] = i - 1;
    for (Index start = 0; start + k <= n; ++start) {
        if (detail::window_matches(pi.image(), start, inv)) return start + 1;
    }
    return std::nullopt;
}

/// st(pi(i..i+k-1)) for a 1-based window start.
inline Permutation window_pattern(const Permutation& pi, Index i, Index k) {
    detail::require(i >= 1 && k >= 1 && i + k - 1 <= pi.size(), "window out of range");
    return standardize(pi.image().subspan(i - 1, k));
}

// ---------------------------------------------------------------------------
// One-line text formats: "σ = 7 9 6 8 4 2 5 3 1" and "v = 1 1 2 1 3 1 1 3 2".

inline constexpr std::string_view kPermLabel = "σ";
inline constexpr std::string_view kTraceLabel = "v";

inline std::string format_sequence(std::string_view label, std::span<const Index> values) {
    std::string out(label);
    out += " =";
    for (Index v : values) {
        out += ' ';
        out += std::to_string(v);
    }
    return out;
}

inline std::string format_permutation(const Permutation& p) { return format_sequence(kPermLabel, p.image()); }

/// Parses whitespace-separated positive integers, optionally prefixed by
/// "<label> =". Commas are treated as whitespace.
inline std::vector<Index> parse_sequence(std::string_view text) {
    if (auto eq = text.find('='); eq != std::string_view::npos) text.remove_prefix(eq + 1);
    std::string buf(text);
    std::replace(buf.begin(), buf.end(), ',', ' ');
    std::istringstream in(buf);
    std::vector<Index> out;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
            throw domain_error("not an integer: '" + tok + "'");
        }
        if (used != tok.size() || v < 1 || v > 0xFFFFFFFFLL) throw domain_error("not a positive integer: '" + tok + "'");
        out.push_back(static_cast<Index>(v));
    }
    detail::require(!out.empty(), "empty sequence");
    return out;
}

inline Permutation parse_permutation(std::string_view text) { return Permutation(parse_sequence(text)); }

}  // namespace tangled

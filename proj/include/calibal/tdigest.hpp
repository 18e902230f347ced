#pragma once

#include <cstddef>
#include <vector>

namespace calibal {

struct Centroid {
    double mean = 0.0;
    double weight = 0.0;
};

// Merging t-digest with the arcsine scale function k(q) = delta * (asin(2q - 1) / pi + 1/2).
//
// Incoming points are buffered and folded into the centroid list once the buffer
// exceeds 10 * delta entries. Queries on a digest with pending points run against a
// compressed copy, so const member functions never mutate and are safe to call
// concurrently. A digest has a single writer.
//
// CDF model: a piecewise-linear curve through (min, 0), one knot per centroid at its
// mean and cumulative midpoint, and (max, total). Consecutive centroids with an
// identical mean are treated as an atom: the CDF jumps by their combined weight at
// that value, so repeated discrete scores keep their exact location.
class TDigest {
public:
    static constexpr double kDefaultCompression = 100.0;

    explicit TDigest(double compression = kDefaultCompression);

    // Rebuilds a digest from its serialised parts.
    static TDigest from_parts(double compression, std::vector<Centroid> centroids, double min, double max);

    void add(double value, double weight = 1.0);
    // Folds `other` into this digest; compression becomes the larger of the two.
    void merge_from(const TDigest& other);
    // Flushes pending points into the centroid list.
    void compress();

    double compression() const noexcept { return compression_; }
    double total_weight() const noexcept { return total_weight_; }
    bool empty() const noexcept { return total_weight_ <= 0.0; }
    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }
    // Compressed centroid list, sorted by mean.
    std::vector<Centroid> centroids() const;

    double quantile(double q) const;
    // Fraction of weight at or below x.
    double cdf(double x) const;
    // Weight in [lo, hi); the interval is closed on the right when hi reaches max() or 1.
    double bin_mass(double lo, double hi) const;

private:
    struct Knot {
        double x;
        double y;
    };

    const std::vector<Centroid>& compressed(std::vector<Centroid>& scratch) const;
    std::vector<Knot> knots() const;
    double weight_below(const std::vector<Knot>& knots, double x) const;
    double weight_at_or_below(const std::vector<Knot>& knots, double x) const;
    void require_nonempty() const;

    double compression_;
    std::vector<Centroid> centroids_;
    std::vector<Centroid> buffer_;
    double total_weight_ = 0.0;
    double min_ = 0.0;
    double max_ = 0.0;
};

TDigest merge(const TDigest& a, const TDigest& b);

} // namespace calibal

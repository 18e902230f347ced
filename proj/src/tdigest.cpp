#include "calibal/tdigest.hpp"

#include "calibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace calibal {

namespace {

double scale_k(double q, double delta) {
    return delta * (std::asin(2.0 * q - 1.0) / std::numbers::pi + 0.5);
}

double scale_k_inverse(double k, double delta) {
    if (k >= delta) {
        return 1.0;
    }
    return (std::sin((k / delta - 0.5) * std::numbers::pi) + 1.0) / 2.0;
}

std::vector<Centroid> merge_centroids(std::vector<Centroid> points, double total, double delta) {
    std::vector<Centroid> out;
    if (points.empty()) {
        return out;
    }
    std::stable_sort(points.begin(), points.end(), [](const Centroid& a, const Centroid& b) { return a.mean < b.mean; });
    Centroid current = points.front();
    double done = 0.0;
    double limit = total * scale_k_inverse(scale_k(0.0, delta) + 1.0, delta);
    for (std::size_t i = 1; i < points.size(); ++i) {
        const Centroid& next = points[i];
        if (done + current.weight + next.weight <= limit) {
            const double combined = current.weight + next.weight;
            current.mean += (next.mean - current.mean) * next.weight / combined;
            current.weight = combined;
        } else {
            out.push_back(current);
            done += current.weight;
            limit = total * scale_k_inverse(scale_k(std::min(done / total, 1.0), delta) + 1.0, delta);
            current = next;
        }
    }
    out.push_back(current);
    return out;
}

} // namespace

TDigest::TDigest(double compression) : compression_(compression) {
    if (!(compression > 0.0) || !std::isfinite(compression)) {
        throw Error(ErrorCode::InvalidArgument, "t-digest compression must be positive");
    }
}

TDigest TDigest::from_parts(double compression, std::vector<Centroid> centroids, double min, double max) {
    TDigest d(compression);
    for (const Centroid& c : centroids) {
        if (!std::isfinite(c.mean)) {
            throw Error(ErrorCode::NonFiniteValue, "centroid mean is not finite");
        }
        if (!(c.weight > 0.0)) {
            throw Error(ErrorCode::NonPositiveWeight, "centroid weight must be positive");
        }
        d.total_weight_ += c.weight;
    }
    std::stable_sort(centroids.begin(), centroids.end(), [](const Centroid& a, const Centroid& b) { return a.mean < b.mean; });
    if (!centroids.empty() && (min > centroids.front().mean || max < centroids.back().mean)) {
        throw Error(ErrorCode::InvalidArgument, "t-digest min/max do not bracket the centroids");
    }
    d.centroids_ = std::move(centroids);
    d.min_ = min;
    d.max_ = max;
    return d;
}

void TDigest::add(double value, double weight) {
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue, "t-digest value is not finite");
    }
    if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw Error(ErrorCode::NonPositiveWeight, "t-digest weight must be positive, got " + std::to_string(weight));
    }
    if (empty()) {
        min_ = max_ = value;
    } else {
        min_ = std::min(min_, value);
        max_ = std::max(max_, value);
    }
    total_weight_ += weight;
    buffer_.push_back({value, weight});
    if (static_cast<double>(buffer_.size()) > 10.0 * compression_) {
        compress();
    }
}

void TDigest::compress() {
    if (buffer_.empty()) {
        return;
    }
    std::vector<Centroid> points = std::move(centroids_);
    points.insert(points.end(), buffer_.begin(), buffer_.end());
    buffer_.clear();
    centroids_ = merge_centroids(std::move(points), total_weight_, compression_);
}

void TDigest::merge_from(const TDigest& other) {
    if (other.empty()) {
        compression_ = std::max(compression_, other.compression_);
        return;
    }
    if (empty()) {
        min_ = other.min_;
        max_ = other.max_;
    } else {
        min_ = std::min(min_, other.min_);
        max_ = std::max(max_, other.max_);
    }
    compression_ = std::max(compression_, other.compression_);
    total_weight_ += other.total_weight_;
    std::vector<Centroid> points = std::move(centroids_);
    points.insert(points.end(), buffer_.begin(), buffer_.end());
    points.insert(points.end(), other.centroids_.begin(), other.centroids_.end());
    points.insert(points.end(), other.buffer_.begin(), other.buffer_.end());
    buffer_.clear();
    centroids_ = merge_centroids(std::move(points), total_weight_, compression_);
}

TDigest merge(const TDigest& a, const TDigest& b) {
    TDigest out = a;
    out.merge_from(b);
    return out;
}

const std::vector<Centroid>& TDigest::compressed(std::vector<Centroid>& scratch) const {
    if (buffer_.empty()) {
        return centroids_;
    }
    scratch = centroids_;
    scratch.insert(scratch.end(), buffer_.begin(), buffer_.end());
    scratch = merge_centroids(std::move(scratch), total_weight_, compression_);
    return scratch;
}

std::vector<Centroid> TDigest::centroids() const {
    std::vector<Centroid> scratch;
    return compressed(scratch);
}

void TDigest::require_nonempty() const {
    if (empty()) {
        throw Error(ErrorCode::EmptyDigest, "query on an empty t-digest");
    }
}

std::vector<TDigest::Knot> TDigest::knots() const {
    std::vector<Centroid> scratch;
    const std::vector<Centroid>& cs = compressed(scratch);
    std::vector<Knot> out;
    out.reserve(cs.size() + 4);
    out.push_back({min_, 0.0});
    double cumulative = 0.0;
    for (std::size_t i = 0; i < cs.size();) {
        std::size_t j = i;
        double weight = 0.0;
        while (j < cs.size() && cs[j].mean == cs[i].mean) {
            weight += cs[j].weight;
            ++j;
        }
        if (j - i > 1) {
            out.push_back({cs[i].mean, cumulative});
            out.push_back({cs[i].mean, cumulative + weight});
        } else {
            out.push_back({cs[i].mean, cumulative + 0.5 * weight});
        }
        cumulative += weight;
        i = j;
    }
    out.push_back({max_, total_weight_});
    return out;
}

double TDigest::weight_at_or_below(const std::vector<Knot>& ks, double x) const {
    if (x < ks.front().x) {
        return 0.0;
    }
    if (x >= max_) {
        return total_weight_;
    }
    // Last knot with knot.x <= x; the following knot lies strictly to the right.
    auto it = std::upper_bound(ks.begin(), ks.end(), x, [](double v, const Knot& k) { return v < k.x; });
    const Knot& right = *it;
    const Knot& left = *(it - 1);
    return left.y + (right.y - left.y) * (x - left.x) / (right.x - left.x);
}

double TDigest::weight_below(const std::vector<Knot>& ks, double x) const {
    if (x <= ks.front().x) {
        return 0.0;
    }
    if (x > max_) {
        return total_weight_;
    }
    // First knot with knot.x >= x; the preceding knot lies strictly to the left.
    auto it = std::lower_bound(ks.begin(), ks.end(), x, [](const Knot& k, double v) { return k.x < v; });
    const Knot& right = *it;
    const Knot& left = *(it - 1);
    return left.y + (right.y - left.y) * (x - left.x) / (right.x - left.x);
}

double TDigest::cdf(double x) const {
    require_nonempty();
    return weight_at_or_below(knots(), x) / total_weight_;
}

double TDigest::bin_mass(double lo, double hi) const {
    require_nonempty();
    if (!(lo < hi)) {
        throw Error(ErrorCode::InvalidArgument, "bin_mass needs lo < hi");
    }
    const auto ks = knots();
    const double upper = (hi > max_ || hi >= 1.0) ? total_weight_ : weight_below(ks, hi);
    const double lower = lo > max_ ? total_weight_ : weight_below(ks, lo);
    return std::max(0.0, upper - lower);
}

double TDigest::quantile(double q) const {
    require_nonempty();
    if (!(q >= 0.0 && q <= 1.0)) {
        throw Error(ErrorCode::QOutOfRange, "quantile q must lie in [0, 1], got " + std::to_string(q));
    }
    if (q == 0.0) {
        return min_;
    }
    if (q == 1.0) {
        return max_;
    }
    const auto ks = knots();
    const double target = q * total_weight_;
    auto it = std::lower_bound(ks.begin() + 1, ks.end(), target, [](const Knot& k, double t) { return k.y < t; });
    if (it == ks.end()) {
        return max_;
    }
    const Knot& right = *it;
    const Knot& left = *(it - 1);
    if (right.x == left.x || right.y == left.y) {
        return right.x;
    }
    return left.x + (target - left.y) / (right.y - left.y) * (right.x - left.x);
}

} // namespace calibal

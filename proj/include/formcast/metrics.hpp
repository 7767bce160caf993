#ifndef FORMCAST_METRICS_HPP
#define FORMCAST_METRICS_HPP

#include <Eigen/Core>
#include <vector>

#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"

namespace formcast {

/// Mean squared error over in-mask pixels.
double masked_mse(const ImageD& prediction, const ImageD& truth, const Image& mask);

/// |max(PD) - max(GT)| over in-mask pixels. Throws on an empty mask.
double mae_max(const ImageD& prediction, const ImageD& truth, const Image& mask);

/// sum |y - y~| / sum |y| over the in-mask pixels of every pair. Throws when
/// the targets are all zero.
double mre(const std::vector<ImageD>& predictions, const std::vector<ImageD>& truths,
           const std::vector<Image>& masks);

enum class FieldStatistic { max, mean };

/// Per-image statistic over in-mask pixels.
double field_statistic(const ImageD& field, const Image& mask, FieldStatistic stat);

/// KL(p || q) in nats for two mass vectors, each bin smoothed by eps and
/// renormalized.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps = 1e-8);

/// Both samples histogrammed on `bins` equal-width bins over their joint
/// range, then KL(GT || PD). Throws for fewer than 2 values per side or a
/// zero-width range.
double kld_histogram(const std::vector<double>& gt, const std::vector<double>& pd, int bins = 50,
                     double eps = 1e-8);

/// KL divergence between the distributions of a per-image statistic.
double kld_stats(const std::vector<ImageD>& gt, const std::vector<ImageD>& pd, const std::vector<Image>& masks,
                 FieldStatistic stat, int bins = 50);

/// Bilinear value at p (mm, frame coordinates), clamped to the outer pixel
/// centers.
double sample_bilinear(const ImageD& field, const GridSpec& grid, const Point2& p);

/// Bilinear samples at n equally spaced points from p_start to p_end (mm,
/// frame coordinates; pixel centers at (i + 0.5) * pitch).
Eigen::VectorXd line_cut(const ImageD& field, const GridSpec& grid, const Point2& p_start, const Point2& p_end,
                         int n_points);

/// Strict interior local maxima of a 1D profile whose value exceeds `floor`.
int count_local_maxima(const Eigen::VectorXd& profile, double floor);

}  // namespace formcast

#endif  // FORMCAST_METRICS_HPP

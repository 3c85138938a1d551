#ifndef TOWERLAB_RETURN_TIMES_HPP
#define TOWERLAB_RETURN_TIMES_HPP

#include <cstdint>
#include <vector>

#include "towerlab/fit.hpp"
#include "towerlab/model.hpp"
#include "towerlab/quotient.hpp"

namespace towerlab {

// Return-time machinery for the reference cell: level weights on the
// neutral-cell level sets, the checkpoint recursion, return-time tail
// statistics and distortion checks along returning branches.

// Level weight: 1 on the hyperbolic cells, depth+1 on the level set J_n.
int rhat(const Point2& p, const HyperbolicModel& m);

struct ReturnRecord {
  std::vector<int> rhat_sequence;  // checkpoint times
  std::vector<int> visits;         // cell index at each checkpoint
  int R = 0;
  bool capped = false;
};

// Runs the checkpoint recursion from a point on the reference leaf.
// Capped walks are reported, not discarded.
ReturnRecord return_time(const Point2& p, const HyperbolicModel& m, int cap);

// Synchronized return iterations until the two points first land in
// distinct return cylinders.
struct SeparationTime {
  int s = 0;
  bool at_cap = false;
};
SeparationTime separation_time(const Point2& x, const Point2& y, const HyperbolicModel& m,
                               int cap);

struct TailEstimate {
  std::vector<std::pair<int, std::int64_t>> survival;  // (n, count of R > n)
  double slope = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  int window_lo = 0, window_hi = 0;
  std::int64_t sample_size = 0;
  std::int64_t censored = 0;
};

// Survival function and log-log slope of the return-time tail.
// Throws DegenerateSupport when fewer than 10 distinct values fall in the
// fitted window; censored samples form a right-censored bin.
TailEstimate tail_histogram(const std::vector<int>& samples, std::int64_t censored,
                            int window_lo, int window_hi);

// Leb-uniform sampling of return times on the reference leaf.  Each sample
// draws its own RNG substream, so results are independent of sharding.
struct TailSample {
  std::vector<int> values;    // uncapped return times
  std::int64_t censored = 0;  // capped walks
};
TailSample sample_return_times(const HyperbolicModel& m, std::int64_t n_samples, int cap,
                               std::uint64_t seed, int workers);

// Distortion of the unstable derivative over one return, paired with the
// separation time of the images.
struct DistortionSample {
  double log_ratio = 0.0;
  int s_image = 0;
  bool s_at_cap = false;  // images never separated within the cap
  bool valid = false;     // same return cylinder and both returned
};
DistortionSample distortion_check(const Point2& x, const Point2& y, const HyperbolicModel& m,
                                  int cap);

// Conditional probability of returning exactly at the i-th checkpoint,
// over a sample of records: P(R = rhat_i | R > rhat_{i-1}).
std::vector<double> conditional_return_fractions(const std::vector<ReturnRecord>& records,
                                                 int max_i);

// Exact survival function of the level weight on the neutral fiber.
double level_set_survival(const HyperbolicModel& m, int n);

}  // namespace towerlab

#endif

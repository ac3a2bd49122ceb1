#pragma once

#include <cstdint>
#include <vector>

#include "jointrec/decoder.hpp"
#include "jointrec/tensor.hpp"

namespace jointrec {

/// Training-set frequency of each target class, one simplex vector per
/// target feature.
struct PopularityModel {
    Vec freq_y;
    Vec freq_z;
};

/// Class frequencies from observed decisions; rejects an empty list.
PopularityModel fit_most_popular(const std::vector<JointTarget>& targets);

/// The constant pseudo-joint freq_y (outer) freq_z.
Mat predict_most_popular(const PopularityModel& model);

/// Nine independent uniform [0,1) scores per instance, reproducible from
/// the seed.
std::vector<Mat> predict_random(std::uint64_t seed, int n_instances);

}  // namespace jointrec

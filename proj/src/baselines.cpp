#include "jointrec/baselines.hpp"

#include "jointrec/errors.hpp"
#include "jointrec/rng.hpp"

namespace jointrec {

PopularityModel fit_most_popular(const std::vector<JointTarget>& targets) {
    if (targets.empty()) throw ValidationError("fit_most_popular: empty target list");
    PopularityModel m{Vec::Zero(kNumClasses), Vec::Zero(kNumClasses)};
    for (const JointTarget& t : targets) {
        m.freq_y[t.intention()] += 1.0;
        m.freq_z[t.type()] += 1.0;
    }
    m.freq_y /= static_cast<double>(targets.size());
    m.freq_z /= static_cast<double>(targets.size());
    return m;
}

Mat predict_most_popular(const PopularityModel& model) {
    return pseudo_joint(model.freq_y, model.freq_z);
}

std::vector<Mat> predict_random(std::uint64_t seed, int n_instances) {
    if (n_instances < 1) throw ValidationError("predict_random: need at least one instance");
    Rng rng(seed);
    std::vector<Mat> out;
    out.reserve(static_cast<std::size_t>(n_instances));
    for (int i = 0; i < n_instances; ++i) {
        Mat scores(kNumClasses, kNumClasses);
        for (Index j = 0; j < kNumClasses; ++j)
            for (Index k = 0; k < kNumClasses; ++k) scores(j, k) = rng.uniform();
        out.push_back(std::move(scores));
    }
    return out;
}

}  // namespace jointrec

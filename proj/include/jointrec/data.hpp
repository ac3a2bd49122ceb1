#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jointrec/decoder.hpp"
#include "jointrec/tensor.hpp"

namespace jointrec {

/// One clinical event: binary feature vector plus, when the event records a
/// therapy decision, the (intention, type) class pair.
struct Event {
    int t = 0;
    Vec features;  // entries in {0,1}
    std::optional<std::pair<int, int>> decision;
};

struct PatientRecord {
    std::string id;
    Vec static_features;
    std::vector<Event> events;  // ordered by t
};

/// One supervised example: everything known strictly before the decision.
struct Instance {
    std::vector<Vec> history;  // event features of all events before t
    Vec static_features;
    JointTarget target;
    std::string patient_id;
    int t = 0;
};

/// Patient-level partition: ~64/16/20 of all patients into train/val/test.
struct SplitPlan {
    int split_id = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> train_ids, val_ids, test_ids;
};

// ---- dummy coding ----------------------------------------------------------

struct FeatureSpec {
    enum class Kind { Binary, Categorical, Real };
    std::string name;
    Kind kind = Kind::Binary;
    int levels = 0;  // categorical only

    static FeatureSpec binary(std::string name) {
        return {std::move(name), Kind::Binary, 0};
    }
    static FeatureSpec categorical(std::string name, int levels) {
        return {std::move(name), Kind::Categorical, levels};
    }
    static FeatureSpec real(std::string name) { return {std::move(name), Kind::Real, 0}; }
};

/// Expands raw values to the coded vector: binary and real pass through,
/// a categorical with L levels becomes L indicator columns (full one-hot).
/// Categorical raw values are 0-based level indices.
Vec dummy_code(const std::vector<FeatureSpec>& schema, const std::vector<double>& raw);

/// Total coded width of a schema.
Index dummy_width(const std::vector<FeatureSpec>& schema);

// ---- instance extraction and splits ---------------------------------------

/// One instance per decision-bearing event; history holds the features of
/// all events strictly before it (empty for a first-event decision).
std::vector<Instance> extract_instances(const PatientRecord& patient);
std::vector<Instance> extract_instances(const std::vector<PatientRecord>& corpus);

/// n_splits independent patient-level shuffles (seed + split_id), each cut
/// into train/val/test of sizes ~64/16/20 percent of all patients.
std::vector<SplitPlan> make_splits(const std::vector<std::string>& ids, int n_splits,
                                   std::uint64_t seed);

// ---- synthetic corpus ------------------------------------------------------

struct SyntheticShape {
    Index static_dim = 114;
    Index event_dim = 182;
};

/// The deterministic intention->type map the generator couples through.
constexpr int synthetic_coupled_type(int intention) { return (intention + 1) % 3; }

/// Correlated-decision corpus. Per patient: a latent class drives static
/// and event feature profiles and the intention distribution; the type
/// equals synthetic_coupled_type(intention) with probability `coupling`,
/// otherwise it is uniform. coupling=0 makes the two targets independent.
std::vector<PatientRecord> generate_synthetic(int n_patients, double coupling,
                                              std::uint64_t seed,
                                              const SyntheticShape& shape = {});

// ---- corpus file format ----------------------------------------------------

/// JSONL: a header line {"static_dim","event_dim","version"} followed by one
/// document per patient {"id","static","events":[{"t","features","decision"}]}.
void save_jsonl(const std::vector<PatientRecord>& records, const std::string& path,
                Index static_dim, Index event_dim);
std::vector<PatientRecord> load_jsonl(const std::string& path);

/// Dimensions recorded in (or implied by) a corpus.
struct CorpusShape {
    Index static_dim = 0;
    Index event_dim = 0;
};
CorpusShape corpus_shape(const std::vector<PatientRecord>& records);

}  // namespace jointrec

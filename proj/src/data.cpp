#include "jointrec/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "jointrec/errors.hpp"
#include "jointrec/rng.hpp"

namespace jointrec {

Index dummy_width(const std::vector<FeatureSpec>& schema) {
    Index width = 0;
    for (const auto& f : schema) {
        switch (f.kind) {
            case FeatureSpec::Kind::Binary:
            case FeatureSpec::Kind::Real:
                width += 1;
                break;
            case FeatureSpec::Kind::Categorical:
                if (f.levels < 1)
                    throw ValidationError("dummy_width: categorical '" + f.name +
                                          "' needs at least one level");
                width += f.levels;
                break;
        }
    }
    return width;
}

Vec dummy_code(const std::vector<FeatureSpec>& schema, const std::vector<double>& raw) {
    if (raw.size() != schema.size())
        throw ValidationError("dummy_code: raw value count does not match schema arity");
    Vec out = Vec::Zero(dummy_width(schema));
    Index at = 0;
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const double value = raw[f];
        switch (schema[f].kind) {
            case FeatureSpec::Kind::Binary:
                if (value != 0.0 && value != 1.0)
                    throw ValidationError("dummy_code: binary feature '" + schema[f].name +
                                          "' must be 0 or 1");
                out[at++] = value;
                break;
            case FeatureSpec::Kind::Real:
                out[at++] = value;
                break;
            case FeatureSpec::Kind::Categorical: {
                const double rounded = std::round(value);
                if (rounded != value || rounded < 0.0 ||
                    rounded >= static_cast<double>(schema[f].levels))
                    throw ValidationError("dummy_code: unknown level for categorical '" +
                                          schema[f].name + "'");
                out[at + static_cast<Index>(rounded)] = 1.0;
                at += schema[f].levels;
                break;
            }
        }
    }
    return out;
}

std::vector<Instance> extract_instances(const PatientRecord& patient) {
    std::vector<Instance> out;
    std::vector<Vec> history;
    for (const Event& e : patient.events) {
        if (e.decision) {
            Instance inst{history,
                          patient.static_features,
                          JointTarget(e.decision->first, e.decision->second),
                          patient.id,
                          e.t};
            out.push_back(std::move(inst));
        }
        history.push_back(e.features);
    }
    return out;
}

std::vector<Instance> extract_instances(const std::vector<PatientRecord>& corpus) {
    std::vector<Instance> out;
    for (const auto& p : corpus) {
        auto per_patient = extract_instances(p);
        out.insert(out.end(), std::make_move_iterator(per_patient.begin()),
                   std::make_move_iterator(per_patient.end()));
    }
    return out;
}

std::vector<SplitPlan> make_splits(const std::vector<std::string>& ids, int n_splits,
                                   std::uint64_t seed) {
    if (ids.size() < 10) throw ValidationError("make_splits: need at least 10 patient ids");
    if (n_splits < 1) throw ValidationError("make_splits: n_splits must be positive");

    const auto n = static_cast<long>(ids.size());
    const long n_test = std::lround(0.2 * static_cast<double>(n));
    const long n_val = std::lround(0.2 * static_cast<double>(n - n_test));
    const long n_train = n - n_test - n_val;

    std::vector<SplitPlan> plans;
    for (int s = 0; s < n_splits; ++s) {
        std::vector<std::string> shuffled = ids;
        Rng rng(seed + static_cast<std::uint64_t>(s));
        rng.shuffle(shuffled);

        SplitPlan plan;
        plan.split_id = s;
        plan.seed = seed + static_cast<std::uint64_t>(s);
        plan.train_ids.assign(shuffled.begin(), shuffled.begin() + n_train);
        plan.val_ids.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
        plan.test_ids.assign(shuffled.begin() + n_train + n_val, shuffled.end());
        plans.push_back(std::move(plan));
    }
    return plans;
}

namespace {

// Latent-class profiles for the generator. The first 24 feature positions
// carry the class signal; the rest is background noise.
double event_profile(int latent_class, Index d) {
    if (d < 24) return d % 3 == latent_class ? 0.40 : 0.05;
    return 0.05;
}

double static_profile(int latent_class, Index s) {
    if (s < 24) return s % 3 == latent_class ? 0.40 : 0.05;
    return 0.10;
}

// Intention distribution per latent class: [0.7, 0.2, 0.1] rotated by class.
// Peaked per-class distributions keep the class-conditional signal strong
// while the pooled intention marginal stays uniform.
double intention_prob(int latent_class, int j) {
    constexpr double base[3] = {0.7, 0.2, 0.1};
    return base[(j - latent_class + 3) % 3];
}

int draw_intention(int latent_class, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (int j = 0; j < 2; ++j) {
        cum += intention_prob(latent_class, j);
        if (u < cum) return j;
    }
    return 2;
}

}  // namespace

std::vector<PatientRecord> generate_synthetic(int n_patients, double coupling,
                                              std::uint64_t seed, const SyntheticShape& shape) {
    if (n_patients < 1) throw ValidationError("generate_synthetic: need at least one patient");
    if (coupling < 0.0 || coupling > 1.0)
        throw ValidationError("generate_synthetic: coupling must lie in [0,1]");
    if (shape.static_dim < 3 || shape.event_dim < 3)
        throw ValidationError("generate_synthetic: dims must be at least 3");

    Rng rng(seed);
    std::vector<PatientRecord> corpus;
    corpus.reserve(static_cast<std::size_t>(n_patients));

    for (int i = 0; i < n_patients; ++i) {
        PatientRecord p;
        p.id = "p" + std::to_string(i);
        const int latent_class = rng.uniform_int(3);

        p.static_features.resize(shape.static_dim);
        for (Index s = 0; s < shape.static_dim; ++s)
            p.static_features[s] = rng.bernoulli(static_profile(latent_class, s)) ? 1.0 : 0.0;

        const int length = std::min(1 + rng.poisson(4.0), 23);
        for (int t = 1; t <= length; ++t) {
            Event e;
            e.t = t;
            e.features.resize(shape.event_dim);
            for (Index d = 0; d < shape.event_dim; ++d)
                e.features[d] = rng.bernoulli(event_profile(latent_class, d)) ? 1.0 : 0.0;
            if (rng.bernoulli(0.4)) {
                const int j = draw_intention(latent_class, rng);
                const int k =
                    rng.bernoulli(coupling) ? synthetic_coupled_type(j) : rng.uniform_int(3);
                e.decision = {j, k};
            }
            p.events.push_back(std::move(e));
        }
        corpus.push_back(std::move(p));
    }
    return corpus;
}

void save_jsonl(const std::vector<PatientRecord>& records, const std::string& path,
                Index static_dim, Index event_dim) {
    std::ofstream out(path);
    if (!out) throw ValidationError("save_jsonl: cannot open '" + path + "' for writing");

    nlohmann::json header;
    header["static_dim"] = static_dim;
    header["event_dim"] = event_dim;
    header["version"] = 1;
    out << header.dump() << "\n";

    for (const auto& p : records) {
        if (p.static_features.size() != static_dim)
            throw ValidationError("save_jsonl: patient '" + p.id +
                                  "' static length does not match header");
        nlohmann::json doc;
        doc["id"] = p.id;
        doc["static"] = std::vector<double>(p.static_features.begin(), p.static_features.end());
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : p.events) {
            if (e.features.size() != event_dim)
                throw ValidationError("save_jsonl: patient '" + p.id +
                                      "' event features do not match header");
            nlohmann::json ev;
            ev["t"] = e.t;
            std::vector<int> bits(static_cast<std::size_t>(e.features.size()));
            for (Index d = 0; d < e.features.size(); ++d)
                bits[static_cast<std::size_t>(d)] = e.features[d] != 0.0 ? 1 : 0;
            ev["features"] = bits;
            if (e.decision) {
                ev["decision"] = {{"intention", e.decision->first},
                                  {"type", e.decision->second}};
            } else {
                ev["decision"] = nullptr;
            }
            events.push_back(std::move(ev));
        }
        doc["events"] = std::move(events);
        out << doc.dump() << "\n";
    }
}

std::vector<PatientRecord> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_jsonl: cannot open '" + path + "'");

    std::string line;
    long line_no = 0;
    auto parse_line = [&](const std::string& text) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("load_jsonl: malformed line " + std::to_string(line_no) + ": " +
                            e.what());
        }
    };

    if (!std::getline(in, line)) throw DataError("load_jsonl: empty file, header required");
    ++line_no;
    const nlohmann::json header = parse_line(line);
    Index static_dim = 0, event_dim = 0;
    try {
        if (!header.contains("static_dim") || !header.contains("event_dim") ||
            !header.contains("version"))
            throw DataError("load_jsonl: header must declare static_dim, event_dim and version");
        static_dim = header["static_dim"].get<Index>();
        event_dim = header["event_dim"].get<Index>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_jsonl: malformed header: " + std::string(e.what()));
    }

    std::vector<PatientRecord> corpus;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const nlohmann::json doc = parse_line(line);
        try {
            PatientRecord p;
            p.id = doc.at("id").get<std::string>();
            const auto& st = doc.at("static");
            if (static_cast<Index>(st.size()) != static_dim)
                throw ValidationError("load_jsonl: line " + std::to_string(line_no) +
                                      ": static length " + std::to_string(st.size()) +
                                      " does not match header static_dim");
            p.static_features.resize(static_dim);
            for (Index i = 0; i < static_dim; ++i)
                p.static_features[i] = st[static_cast<std::size_t>(i)].get<double>();

            for (const auto& ev : doc.at("events")) {
                Event e;
                e.t = ev.at("t").get<int>();
                const auto& feats = ev.at("features");
                if (static_cast<Index>(feats.size()) != event_dim)
                    throw ValidationError("load_jsonl: line " + std::to_string(line_no) +
                                          ": event feature length does not match header");
                e.features.resize(event_dim);
                for (Index d = 0; d < event_dim; ++d) {
                    const double v = feats[static_cast<std::size_t>(d)].get<double>();
                    if (v != 0.0 && v != 1.0)
                        throw ValidationError("load_jsonl: line " + std::to_string(line_no) +
                                              ": event features must be 0/1");
                    e.features[d] = v;
                }
                const auto& dec = ev.at("decision");
                if (!dec.is_null())
                    e.decision = {dec.at("intention").get<int>(), dec.at("type").get<int>()};
                p.events.push_back(std::move(e));
            }
            corpus.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_jsonl: malformed line " + std::to_string(line_no) + ": " +
                            e.what());
        }
    }
    return corpus;
}

CorpusShape corpus_shape(const std::vector<PatientRecord>& records) {
    CorpusShape shape;
    for (const auto& p : records) {
        shape.static_dim = std::max(shape.static_dim, p.static_features.size());
        for (const auto& e : p.events) shape.event_dim = std::max(shape.event_dim, e.features.size());
    }
    return shape;
}

}  // namespace jointrec

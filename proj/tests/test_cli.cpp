#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "jointrec/cli.hpp"
#include "jointrec/data.hpp"
#include "jointrec/model_io.hpp"

using namespace jointrec;

namespace {

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::map<std::string, std::string> kBaseConfig = {
    {"learning_rate", "0.01"}, {"max_epochs", "60"},     {"rho", "0.9"},
    {"epsilon", "1e-6"},       {"ridge_lambda", "0.001"}, {"dropout_rate", "0.1"},
    {"batch_size", "16"},      {"patience", "15"},        {"seed", "1"},
    {"hidden_dim", "4"},       {"static_latent", "3"},    {"rank", "2"},
    {"n_splits", "2"},         {"top_n", "3"},
};

void write_config(const std::string& path,
                  const std::map<std::string, std::string>& overrides = {},
                  const std::string& drop_key = "") {
    auto kv = kBaseConfig;
    for (const auto& [k, v] : overrides) kv[k] = v;
    if (!drop_key.empty()) kv.erase(drop_key);
    std::ofstream out(path);
    for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
}

struct Workspace {
    std::string dir = "/tmp/jointrec_cli_test";
    Workspace() { REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0); }
    std::string path(const std::string& name) const { return dir + "/" + name; }
};

const Workspace& ws() {
    static Workspace w;
    return w;
}

// A small fully-coupled corpus shared by the tests below.
const std::string& corpus_path() {
    static std::string path = [] {
        const std::string p = ws().path("corpus.jsonl");
        REQUIRE(run_cli({"gen-data", "--patients", "60", "--coupling", "1.0", "--seed", "1",
                         "--out", p, "--static-dim", "8", "--event-dim", "8"}) == 0);
        return p;
    }();
    return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"no-such-command"}) == 2);
    CHECK(run_cli({"gen-data", "--patients", "10"}) == 2);  // missing required flags

    std::string err;
    CHECK(run_cli({"gen-data", "--patients", "0", "--coupling", "0.5", "--seed", "1", "--out",
                   ws().path("zero.jsonl")},
                  nullptr, &err) == 2);
    CHECK(err.find("--patients") != std::string::npos);

    CHECK(run_cli({"gen-data", "--patients", "5", "--coupling", "1.5", "--seed", "1", "--out",
                   ws().path("bad.jsonl")}) == 2);

    // unwritable output path is a usage error
    CHECK(run_cli({"gen-data", "--patients", "5", "--coupling", "0.5", "--seed", "1", "--out",
                   "/no/such/dir/out.jsonl"}) == 2);
}

TEST_CASE("gen-data is reproducible and reports a summary") {
    std::string out;
    const std::string first = ws().path("gen_a.jsonl");
    const std::string second = ws().path("gen_b.jsonl");
    CHECK(run_cli({"gen-data", "--patients", "40", "--coupling", "0.8", "--seed", "7", "--out",
                   first, "--static-dim", "6", "--event-dim", "6"},
                  &out) == 0);
    CHECK(out.find("patients: 40") != std::string::npos);
    CHECK(out.find("instances:") != std::string::npos);
    CHECK(out.find("decision histogram") != std::string::npos);

    CHECK(run_cli({"gen-data", "--patients", "40", "--coupling", "0.8", "--seed", "7", "--out",
                   second, "--static-dim", "6", "--event-dim", "6"}) == 0);
    CHECK(slurp(first) == slurp(second));
}

TEST_CASE("stats reports the contingency table and both tests") {
    std::string out;
    CHECK(run_cli({"stats", "--data", corpus_path()}, &out) == 0);
    CHECK(out.find("df: 4") != std::string::npos);
    CHECK(out.find("chi2: ") != std::string::npos);
    CHECK(out.find("g: ") != std::string::npos);
    CHECK(out.find("p_chi2: ") != std::string::npos);
    CHECK(out.find("p_g: ") != std::string::npos);

    // a fully coupled corpus has all decisions on the coupled diagonal
    const auto corpus = load_jsonl(corpus_path());
    for (const auto& p : corpus)
        for (const auto& e : p.events)
            if (e.decision) CHECK(e.decision->second == synthetic_coupled_type(e.decision->first));

    CHECK(run_cli({"stats", "--data", "/tmp/jointrec_missing.jsonl"}) == 3);

    // corpus without decisions: exit 3
    const std::string no_decisions = ws().path("no_decisions.jsonl");
    auto stripped = corpus;
    for (auto& p : stripped)
        for (auto& e : p.events) e.decision.reset();
    save_jsonl(stripped, no_decisions, 8, 8);
    CHECK(run_cli({"stats", "--data", no_decisions}) == 3);
}

TEST_CASE("train writes a model and a manifest consistent with its history") {
    const std::string cfg = ws().path("train.cfg");
    write_config(cfg);
    const std::string model = ws().path("model.json");

    std::string out;
    const auto start = std::chrono::steady_clock::now();
    CHECK(run_cli({"train", "--data", corpus_path(), "--model-kind", "tensor", "--config", cfg,
                   "--split-seed", "1", "--out", model},
                  &out) == 0);
    const double seconds = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count() /
                           1000.0;
    CHECK(seconds < 60.0);  // smoke benchmark on a toy corpus
    CHECK(out.find("best_epoch:") != std::string::npos);

    nlohmann::json manifest;
    std::ifstream(model + ".manifest.json") >> manifest;
    const auto history = manifest.at("val_loss_history").get<std::vector<double>>();
    REQUIRE(!history.empty());
    double min_val = history[0];
    for (double v : history) min_val = std::min(min_val, v);
    CHECK(manifest.at("best_val_loss").get<double>() == min_val);
    CHECK(manifest.at("best_epoch").get<int>() >= 0);
    CHECK(manifest.at("model_kind").get<std::string>() == "tensor");
    CHECK(manifest.at("config").at("hidden_dim").get<int>() == 4);
}

TEST_CASE("config errors name the offending key and exit 2") {
    const std::string missing = ws().path("missing.cfg");
    write_config(missing, {}, "patience");
    std::string err;
    CHECK(run_cli({"train", "--data", corpus_path(), "--model-kind", "tensor", "--config",
                   missing, "--split-seed", "1", "--out", ws().path("m.json")},
                  nullptr, &err) == 2);
    CHECK(err.find("patience") != std::string::npos);

    const std::string unknown = ws().path("unknown.cfg");
    write_config(unknown, {{"learnig_rate", "0.1"}});  // typo key
    CHECK(run_cli({"train", "--data", corpus_path(), "--model-kind", "tensor", "--config",
                   unknown, "--split-seed", "1", "--out", ws().path("m.json")},
                  nullptr, &err) == 2);
    CHECK(err.find("learnig_rate") != std::string::npos);

    CHECK(run_cli({"train", "--data", corpus_path(), "--model-kind", "sideways", "--config",
                   missing, "--split-seed", "1", "--out", ws().path("m.json")}) == 2);
}

TEST_CASE("predict prints the grid, the ranking, and the alert flag") {
    const std::string cfg = ws().path("train.cfg");
    write_config(cfg);
    const std::string model = ws().path("model_predict.json");
    REQUIRE(run_cli({"train", "--data", corpus_path(), "--model-kind", "tensor", "--config", cfg,
                     "--split-seed", "1", "--out", model}) == 0);

    // find a decision event to score
    const auto corpus = load_jsonl(corpus_path());
    std::string patient_id;
    int t = -1;
    for (const auto& p : corpus) {
        for (const auto& e : p.events)
            if (e.decision) {
                patient_id = p.id;
                t = e.t;
                break;
            }
        if (t >= 0) break;
    }
    REQUIRE(t >= 0);

    std::string out;
    CHECK(run_cli({"predict", "--model", model, "--data", corpus_path(), "--patient", patient_id,
                   "--t", std::to_string(t), "--top-n", "9"},
                  &out) == 0);
    CHECK(out.find("scores:") != std::string::npos);
    CHECK(out.find("top-9:") != std::string::npos);
    CHECK(out.find("documented:") != std::string::npos);
    // the full list always covers the documented decision
    CHECK(out.find("alert: false") != std::string::npos);

    CHECK(run_cli({"predict", "--model", model, "--data", corpus_path(), "--patient", patient_id,
                   "--t", std::to_string(t), "--top-n", "1"},
                  &out) == 0);
    const bool has_alert = out.find("alert: true") != std::string::npos ||
                           out.find("alert: false") != std::string::npos;
    CHECK(has_alert);

    CHECK(run_cli({"predict", "--model", model, "--data", corpus_path(), "--patient", "nobody",
                   "--t", "1"}) == 3);
    CHECK(run_cli({"predict", "--model", model, "--data", corpus_path(), "--patient", patient_id,
                   "--t", "999"}) == 3);
}

TEST_CASE("a trained model alerts on fewer than 20% of coupled test decisions at n=3") {
    const std::string cfg = ws().path("train.cfg");
    write_config(cfg);
    const std::string model_path = ws().path("model_alert.json");
    REQUIRE(run_cli({"train", "--data", corpus_path(), "--model-kind", "tensor", "--config",
                     cfg, "--split-seed", "1", "--out", model_path}) == 0);

    const ModelParams model = load_model(model_path);
    const auto corpus = load_jsonl(corpus_path());

    // score only patients from the held-out part of the same split
    std::vector<std::string> ids;
    for (const auto& p : corpus) ids.push_back(p.id);
    const SplitPlan plan = make_splits(ids, 1, 1)[0];
    const std::set<std::string> test_ids(plan.test_ids.begin(), plan.test_ids.end());

    int alerts = 0, decisions = 0;
    for (const auto& p : corpus) {
        if (!test_ids.contains(p.id)) continue;
        for (const auto& inst : extract_instances(p)) {
            const Vec a =
                build_representation(inst.history, inst.static_features, model.lstm, model.stat)
                    .values;
            const auto ranked = top_n_pairs(score_joint(a, model.tucker), 3);
            const bool covered =
                std::any_of(ranked.begin(), ranked.end(), [&](const RankedPair& r) {
                    return r.intention == inst.target.intention() && r.type == inst.target.type();
                });
            ++decisions;
            if (!covered) ++alerts;
        }
    }
    REQUIRE(decisions > 10);
    CHECK(static_cast<double>(alerts) / static_cast<double>(decisions) < 0.20);
}

TEST_CASE("predict works with a marginal model") {
    const std::string cfg = ws().path("train.cfg");
    write_config(cfg);
    const std::string model = ws().path("model_marginal.json");
    REQUIRE(run_cli({"train", "--data", corpus_path(), "--model-kind", "marginal", "--config",
                     cfg, "--split-seed", "1", "--out", model}) == 0);

    const auto corpus = load_jsonl(corpus_path());
    REQUIRE(!corpus.empty());
    std::string out;
    CHECK(run_cli({"predict", "--model", model, "--data", corpus_path(), "--patient",
                   corpus[0].id, "--t", std::to_string(corpus[0].events[0].t)},
                  &out) == 0);
    CHECK(out.find("model_kind: marginal") != std::string::npos);
    CHECK(out.find("scores:") != std::string::npos);
    CHECK(out.find("top-3:") != std::string::npos);
}

TEST_CASE("eval produces the 16-row CSV deterministically") {
    const std::string cfg = ws().path("eval.cfg");
    write_config(cfg, {{"max_epochs", "30"}, {"patience", "30"}});
    const std::string csv_a = ws().path("results_a.csv");
    const std::string csv_b = ws().path("results_b.csv");

    std::string out;
    CHECK(run_cli({"eval", "--data", corpus_path(), "--splits", "2", "--config", cfg, "--out",
                   csv_a},
                  &out) == 0);
    CHECK(out.find("split 0:") != std::string::npos);
    CHECK(out.find("split 1:") != std::string::npos);

    const std::string content = slurp(csv_a);
    std::istringstream lines(content);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 17);  // header + 4 metrics x 4 models
    CHECK(content.rfind("metric,model,mean,std", 0) == 0);
    CHECK(content.find("NDCG@5,Tensor,") != std::string::npos);

    CHECK(run_cli({"eval", "--data", corpus_path(), "--splits", "2", "--config", cfg, "--out",
                   csv_b}) == 0);
    CHECK(slurp(csv_a) == slurp(csv_b));
}

TEST_CASE("gradcheck prints one line per configuration") {
    std::string out;
    CHECK(run_cli({"gradcheck"}, &out) == 0);
    CHECK(out.find("config=tensor") != std::string::npos);
    CHECK(out.find("config=marginal") != std::string::npos);
    CHECK(out.find("config=empty-history") != std::string::npos);
    CHECK(out.find("FAIL") == std::string::npos);

    CHECK(run_cli({"gradcheck", "--self-test-corrupt"}, &out) == 1);
    CHECK(out.find("FAIL") != std::string::npos);
}

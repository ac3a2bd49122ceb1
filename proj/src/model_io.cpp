#include "jointrec/model_io.hpp"

#include <fstream>
#include <vector>

#include <json.hpp>

#include "jointrec/errors.hpp"

namespace jointrec {

namespace {
constexpr int kFormatVersion = 1;
}

void save_model(const ModelParams& params, const std::string& path) {
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["model_kind"] = to_string(params.kind);
    doc["dims"] = {{"event_dim", params.dims.event_dim},
                   {"static_dim", params.dims.static_dim},
                   {"hidden", params.dims.hidden},
                   {"static_latent", params.dims.static_latent},
                   {"rank", params.dims.rank}};

    nlohmann::json blocks;
    params.visit([&](const char* name, const double* data, Index size, bool) {
        blocks[name] = std::vector<double>(data, data + size);
    });
    doc["params"] = std::move(blocks);

    std::ofstream out(path);
    if (!out) throw ValidationError("save_model: cannot open '" + path + "' for writing");
    out << doc.dump(2) << "\n";
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_model: cannot open '" + path + "'");

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("load_model: malformed model file: " + std::string(e.what()));
    }

    try {
        if (doc.at("format_version").get<int>() != kFormatVersion)
            throw DataError("load_model: unsupported format version");
        const ModelKind kind = model_kind_from_string(doc.at("model_kind").get<std::string>());
        const auto& d = doc.at("dims");
        ModelDims dims;
        dims.event_dim = d.at("event_dim").get<Index>();
        dims.static_dim = d.at("static_dim").get<Index>();
        dims.hidden = d.at("hidden").get<Index>();
        dims.static_latent = d.at("static_latent").get<Index>();
        dims.rank = d.at("rank").get<Index>();

        ModelParams params = ModelParams::zeros(kind, dims);
        const auto& blocks = doc.at("params");
        params.visit([&](const char* name, double* data, Index size, bool) {
            const auto& arr = blocks.at(name);
            if (static_cast<Index>(arr.size()) != size)
                throw DataError(std::string("load_model: parameter '") + name +
                                "' has wrong length");
            for (Index i = 0; i < size; ++i) data[i] = arr[static_cast<std::size_t>(i)].get<double>();
        });
        return params;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_model: invalid model file: " + std::string(e.what()));
    }
}

}  // namespace jointrec

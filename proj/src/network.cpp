#include "standda/network.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace standda {

using nlohmann::json;

PiecewiseLinearNetwork::PiecewiseLinearNetwork(std::vector<Layer> layers, Index inputDim)
    : layers_(std::move(layers)) {
    Index current = inputDim;
    bool seenAffine = false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (const auto* a = std::get_if<AffineLayer>(&layers_[l])) {
            if (a->weight.cols() != a->bias.size())
                throw BundleError("layer " + std::to_string(l) + ": weight has " +
                                  std::to_string(a->weight.cols()) + " columns but bias has " +
                                  std::to_string(a->bias.size()) + " entries");
            if (!seenAffine) {
                if (inputDim >= 0 && a->weight.rows() != inputDim)
                    throw BundleError("layer " + std::to_string(l) + ": expects input width " +
                                      std::to_string(a->weight.rows()) + ", got " +
                                      std::to_string(inputDim));
                inputDim_ = a->weight.rows();
            } else if (a->weight.rows() != current) {
                throw BundleError("layer " + std::to_string(l) + ": dimension chain broken (" +
                                  std::to_string(current) + " -> " +
                                  std::to_string(a->weight.rows()) + ")");
            }
            seenAffine = true;
            current = a->weight.cols();
        }
    }
    if (!seenAffine) {
        if (inputDim < 0) throw BundleError("network without affine layers needs an input width");
        inputDim_ = inputDim;
        current = inputDim;
    }
    outputDim_ = current;
}

std::size_t PiecewiseLinearNetwork::affine_count() const {
    return static_cast<std::size_t>(std::count_if(layers_.begin(), layers_.end(), [](const Layer& l) {
        return std::holds_alternative<AffineLayer>(l);
    }));
}

std::vector<Index> PiecewiseLinearNetwork::widths() const {
    std::vector<Index> w{inputDim_};
    Index current = inputDim_;
    for (const auto& layer : layers_) {
        if (const auto* a = std::get_if<AffineLayer>(&layer)) current = a->weight.cols();
        w.push_back(current);
    }
    return w;
}

void ModelBundle::validate() const {
    if (extractor.output_dim() != autoencoder.input_dim())
        throw BundleError("autoencoder input dim " + std::to_string(autoencoder.input_dim()) +
                          " != extractor output dim " + std::to_string(extractor.output_dim()));
    if (autoencoder.output_dim() != autoencoder.input_dim())
        throw BundleError("autoencoder output dim " + std::to_string(autoencoder.output_dim()) +
                          " != its input dim " + std::to_string(autoencoder.input_dim()));
}

namespace {

PiecewiseLinearNetwork parse_network(const json& arr, const std::string& name) {
    if (!arr.is_array()) throw BundleError(name + ": expected an array of layers");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l < arr.size(); ++l) {
        const json& entry = arr[l];
        const std::string where = name + " layer " + std::to_string(l);
        if (!entry.is_object() || !entry.contains("kind") || !entry["kind"].is_string())
            throw BundleError(where + ": missing \"kind\"");
        const std::string kind = entry["kind"];
        if (kind == "relu") {
            layers.emplace_back(ReluLayer{});
        } else if (kind == "affine") {
            if (!entry.contains("weight") || !entry["weight"].is_array() || entry["weight"].empty())
                throw BundleError(where + ": missing or empty \"weight\"");
            if (!entry.contains("bias") || !entry["bias"].is_array())
                throw BundleError(where + ": missing \"bias\"");
            const json& w = entry["weight"];
            const std::size_t rows = w.size();
            if (!w[0].is_array()) throw BundleError(where + ": weight rows must be arrays");
            const std::size_t cols = w[0].size();
            AffineLayer affine{Matrix(rows, cols), Vector(entry["bias"].size())};
            try {
                for (std::size_t i = 0; i < rows; ++i) {
                    if (!w[i].is_array() || w[i].size() != cols)
                        throw BundleError(where + ": ragged weight row " + std::to_string(i));
                    for (std::size_t j = 0; j < cols; ++j)
                        affine.weight(static_cast<Index>(i), static_cast<Index>(j)) = w[i][j].get<double>();
                }
                for (std::size_t j = 0; j < entry["bias"].size(); ++j)
                    affine.bias(static_cast<Index>(j)) = entry["bias"][j].get<double>();
            } catch (const json::exception& e) {
                throw BundleError(where + ": non-numeric parameter (" + e.what() + ")");
            }
            layers.emplace_back(std::move(affine));
        } else {
            throw BundleError(where + ": unsupported layer kind \"" + kind + "\"");
        }
    }
    try {
        return PiecewiseLinearNetwork(std::move(layers));
    } catch (const BundleError& e) {
        throw BundleError(name + " " + e.what());
    }
}

json network_to_json(const PiecewiseLinearNetwork& net) {
    json arr = json::array();
    for (const auto& layer : net.layers()) {
        if (const auto* a = std::get_if<AffineLayer>(&layer)) {
            json w = json::array();
            for (Index i = 0; i < a->weight.rows(); ++i) {
                json row = json::array();
                for (Index j = 0; j < a->weight.cols(); ++j) row.push_back(a->weight(i, j));
                w.push_back(std::move(row));
            }
            json b = json::array();
            for (Index j = 0; j < a->bias.size(); ++j) b.push_back(a->bias(j));
            arr.push_back({{"kind", "affine"}, {"weight", std::move(w)}, {"bias", std::move(b)}});
        } else {
            arr.push_back({{"kind", "relu"}});
        }
    }
    return arr;
}

}  // namespace

ModelBundle parse_bundle(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw BundleError(std::string("bundle is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw BundleError("bundle must be a JSON object");
    if (!doc.contains("version") || doc["version"] != kBundleVersion)
        throw BundleError(std::string("unsupported bundle version (expected \"") + kBundleVersion + "\")");
    if (!doc.contains("extractor")) throw BundleError("bundle has no \"extractor\"");
    if (!doc.contains("autoencoder")) throw BundleError("bundle has no \"autoencoder\"");

    ModelBundle bundle;
    bundle.extractor = parse_network(doc["extractor"], "extractor");
    bundle.autoencoder = parse_network(doc["autoencoder"], "autoencoder");
    if (doc.contains("metadata") && doc["metadata"].is_object()) {
        for (auto it = doc["metadata"].begin(); it != doc["metadata"].end(); ++it)
            bundle.metadata[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
    }
    bundle.validate();
    return bundle;
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BundleError("cannot open bundle file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_bundle(ss.str());
}

std::string serialize_bundle(const ModelBundle& bundle) {
    json doc;
    doc["version"] = kBundleVersion;
    doc["extractor"] = network_to_json(bundle.extractor);
    doc["autoencoder"] = network_to_json(bundle.autoencoder);
    doc["metadata"] = json(bundle.metadata);
    return doc.dump();
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw BundleError("cannot write bundle file " + path.string());
    out << serialize_bundle(bundle) << '\n';
}

Matrix forward(const PiecewiseLinearNetwork& net, const Matrix& x) {
    require_dims(x.cols() == net.input_dim(),
                 "forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
    Matrix cur = x;
    for (const auto& layer : net.layers()) {
        if (const auto* a = std::get_if<AffineLayer>(&layer)) {
            Matrix next = cur * a->weight;
            next.rowwise() += a->bias.transpose();
            cur = std::move(next);
        } else {
            cur = cur.cwiseMax(0.0);
        }
    }
    return cur;
}

Vector reconstruction_errors(const ModelBundle& bundle, const Matrix& stacked) {
    const Matrix features = forward(bundle.extractor, stacked);
    const Matrix recon = forward(bundle.autoencoder, features);
    return (features - recon).cwiseAbs().rowwise().sum();
}

Vector reconstruction_errors(const ModelBundle& bundle, const DataPair& data) {
    data.validate();
    require_dims(data.d() == bundle.extractor.input_dim(),
                 "reconstruction_errors: data has d = " + std::to_string(data.d()) +
                     ", extractor expects " + std::to_string(bundle.extractor.input_dim()));
    return reconstruction_errors(bundle, data.stacked());
}

Index anomaly_count(double rate, Index n) {
    if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("anomaly rate must lie in (0, 1)");
    // Guard against products like 0.05 * 20 landing a hair above an integer.
    const Index m = static_cast<Index>(std::ceil(rate * static_cast<double>(n) - 1e-9));
    const Index clamped = std::max<Index>(m, 1);
    if (clamped >= n)
        throw std::invalid_argument("anomaly rate " + std::to_string(rate) + " flags all " +
                                    std::to_string(n) + " instances");
    return clamped;
}

Detection detect_from_errors(const Vector& errors, Index ns, double rate) {
    const Index n = errors.size();
    const Index m = anomaly_count(rate, n);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + m, order.end(), [&](Index a, Index b) {
        if (errors(a) != errors(b)) return errors(a) > errors(b);
        return a < b;
    });
    Detection det;
    det.thresholdRow = order[static_cast<std::size_t>(m - 1)];
    det.flagged.assign(order.begin(), order.begin() + m);
    std::sort(det.flagged.begin(), det.flagged.end());
    for (Index row : det.flagged)
        if (row >= ns) det.target.push_back(row - ns);
    return det;
}

Detection detect_anomalies(const ModelBundle& bundle, const DataPair& data, double rate) {
    return detect_from_errors(reconstruction_errors(bundle, data), data.ns(), rate);
}

PiecewiseLinearNetwork random_network(const std::vector<Index>& dims, std::uint64_t seed,
                                      bool finalRelu, double biasScale) {
    if (dims.size() < 2) throw std::invalid_argument("random_network needs at least two widths");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        AffineLayer a{Matrix(dims[l], dims[l + 1]), Vector(dims[l + 1])};
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (Index i = 0; i < a.weight.size(); ++i) a.weight.data()[i] = scale * normal(gen);
        for (Index j = 0; j < a.bias.size(); ++j) a.bias(j) = biasScale * normal(gen);
        layers.emplace_back(std::move(a));
        if (l + 2 < dims.size() || finalRelu) layers.emplace_back(ReluLayer{});
    }
    return PiecewiseLinearNetwork(std::move(layers));
}

}  // namespace standda

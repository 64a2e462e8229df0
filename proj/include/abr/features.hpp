#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "abr/backend.hpp"
#include "abr/checksum.hpp"
#include "abr/error.hpp"
#include "abr/model_manifest.hpp"
#include "abr/parallel.hpp"
#include "abr/preprocess.hpp"

namespace abr {

struct FeatureVector {
    std::string sample_id;
    std::string model_name;
    std::vector<double> values;

    bool operator==(const FeatureVector&) const = default;
};

/// A verified, probed model. Read-only after construction and shareable across threads.
struct LoadedModel {
    ModelManifest manifest;
    std::shared_ptr<const InferenceBackend> backend;
};

inline InputTensor zero_tensor(const ModelManifest& manifest) {
    InputTensor t;
    t.height = t.width = manifest.input_size;
    t.layout = manifest.layout;
    t.values.assign(manifest.input_size * manifest.input_size * InputTensor::channels, 0.0f);
    return t;
}

/// Throws unless the weights file exists and hashes to the manifest's checksum.
inline void verify_weights(const ModelManifest& manifest) {
    if (!std::filesystem::is_regular_file(manifest.weights_path))
        throw Error("load_model(" + manifest.model_name + "): missing weights file " + manifest.weights_path);
    const auto digest = sha256_file(manifest.weights_path);
    if (digest != manifest.weights_checksum)
        throw ChecksumError("load_model(" + manifest.model_name + "): weights checksum mismatch (manifest " +
                            manifest.weights_checksum + ", file " + digest + ")");
}

/// Verifies the weights checksum, builds the backend, and checks that a probe
/// inference on a zero tensor emits exactly feature_dim values.
inline LoadedModel load_model(const ModelManifest& manifest, BackendKind kind) {
    verify_weights(manifest);
    LoadedModel model{manifest, make_backend(kind, manifest)};
    const auto probe = model.backend->infer(zero_tensor(manifest));
    if (probe.size() != manifest.feature_dim)
        throw Error("load_model(" + manifest.model_name + "): manifest feature_dim " +
                    std::to_string(manifest.feature_dim) + " but model emits " + std::to_string(probe.size()));
    return model;
}

struct LabeledTensor {
    std::string sample_id;
    InputTensor tensor;
};

/// Runs inference for every input, preserving input order.
inline std::vector<FeatureVector> extract_features(const LoadedModel& model, std::span<const LabeledTensor> inputs,
                                                   std::size_t jobs = 1) {
    const auto& m = model.manifest;
    for (const auto& in : inputs) {
        const auto& t = in.tensor;
        if (t.height != m.input_size || t.width != m.input_size ||
            t.values.size() != m.input_size * m.input_size * InputTensor::channels || t.layout != m.layout)
            throw Error("extract_features(" + m.model_name + "): sample '" + in.sample_id + "' tensor is " +
                        std::to_string(t.height) + "x" + std::to_string(t.width) + ", expected " +
                        std::to_string(m.input_size) + "x" + std::to_string(m.input_size));
    }
    std::vector<FeatureVector> out(inputs.size());
    parallel_for(inputs.size(), jobs, [&](std::size_t i) {
        const auto& in = inputs[i];
        std::vector<double> values;
        try {
            values = model.backend->infer(in.tensor);
        } catch (const std::exception& e) {
            throw Error("extract_features(" + m.model_name + "): inference failed for sample '" + in.sample_id +
                        "': " + e.what());
        }
        if (values.size() != m.feature_dim)
            throw Error("extract_features(" + m.model_name + "): sample '" + in.sample_id + "' produced " +
                        std::to_string(values.size()) + " values, expected " + std::to_string(m.feature_dim));
        for (double v : values)
            if (!std::isfinite(v))
                throw Error("extract_features(" + m.model_name + "): non-finite feature for sample '" + in.sample_id + "'");
        out[i] = FeatureVector{in.sample_id, m.model_name, std::move(values)};
    });
    return out;
}

} // namespace abr

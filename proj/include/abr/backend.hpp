#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abr/checksum.hpp"
#include "abr/error.hpp"
#include "abr/model_manifest.hpp"
#include "abr/preprocess.hpp"
#include "abr/random.hpp"

#ifdef ABR_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace abr {

enum class BackendKind : std::uint8_t { Interchange, Mock };

inline std::string_view to_string(BackendKind k) noexcept { return k == BackendKind::Mock ? "mock" : "interchange"; }

/// Feature extractor contract. infer() must be deterministic and safe to call
/// concurrently on a loaded instance.
class InferenceBackend {
public:
    virtual ~InferenceBackend() = default;
    virtual std::vector<double> infer(const InputTensor& tensor) const = 0;
};

/// FNV-1a over the tensor's float values serialized little-endian.
inline std::uint64_t tensor_hash(const InputTensor& tensor) noexcept {
    std::uint64_t h = fnv1a64_offset;
    for (float v : tensor.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        const std::byte le[4] = {std::byte(bits & 0xFF), std::byte((bits >> 8) & 0xFF), std::byte((bits >> 16) & 0xFF),
                                 std::byte((bits >> 24) & 0xFF)};
        h = fnv1a64(le, h);
    }
    return h;
}

/// Deterministic pseudo-features in [-1, 1): the tensor's content hash seeds a
/// splitmix64 counter stream.
inline std::vector<double> mock_infer(const InputTensor& tensor, std::size_t dim) {
    if (dim == 0) throw Error("mock_infer: dim must be positive");
    const std::uint64_t h = tensor_hash(tensor);
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = 2.0 * uniform_unit(splitmix64(h + i * 0x9e3779b97f4a7c15ULL)) - 1.0;
    return out;
}

inline constexpr std::string_view mock_weights_magic = "abr-mock-model 1";

/// Test double standing in for an exported network. Its weights file is a
/// small text file declaring the emitted dimension:
///
///     abr-mock-model 1
///     feature_dim = 64
///
/// Output is mock_infer() noise except for the first min(3, dim) entries, which
/// hold the per-channel tensor means (a global-average-pool tap), so image
/// content reaches the features.
class MockBackend final : public InferenceBackend {
public:
    explicit MockBackend(std::size_t dim) : dim_(dim) {
        if (dim_ == 0) throw Error("mock backend: feature_dim must be positive");
    }

    static MockBackend from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open mock weights: " + path.string());
        std::string magic, line;
        std::getline(in, magic);
        if (detail::trim(magic) != mock_weights_magic) throw Error("not a mock weights file: " + path.string());
        while (std::getline(in, line)) {
            auto text = detail::trim(line);
            if (!text.starts_with("feature_dim")) continue;
            auto eq = text.find('=');
            if (eq == std::string_view::npos) break;
            return MockBackend(detail::parse_count("feature_dim", text.substr(eq + 1)));
        }
        throw Error("mock weights file lacks feature_dim: " + path.string());
    }

    static void write_file(const std::filesystem::path& path, std::size_t dim) {
        std::ofstream out(path);
        if (!out) throw Error("cannot write mock weights: " + path.string());
        out << mock_weights_magic << "\nfeature_dim = " << dim << '\n';
    }

    std::size_t dim() const noexcept { return dim_; }

    std::vector<double> infer(const InputTensor& tensor) const override {
        auto out = mock_infer(tensor, dim_);
        const std::size_t pixels = tensor.height * tensor.width;
        if (pixels == 0) return out;
        for (std::size_t c = 0; c < std::min<std::size_t>(3, dim_); ++c) {
            double sum = 0.0;
            for (std::size_t y = 0; y < tensor.height; ++y)
                for (std::size_t x = 0; x < tensor.width; ++x) sum += tensor.at(c, y, x);
            out[c] = sum / static_cast<double>(pixels);
        }
        return out;
    }

private:
    std::size_t dim_;
};

#ifdef ABR_HAVE_ONNXRUNTIME

/// ONNX Runtime session over an exported graph truncated at the feature tap.
class OnnxBackend final : public InferenceBackend {
public:
    OnnxBackend(const ModelManifest& manifest)
        : env_(ORT_LOGGING_LEVEL_WARNING, "abr"), output_name_(manifest.feature_output_name) {
        Ort::SessionOptions opts;
        opts.SetIntraOpNumThreads(1);
        opts.SetGraphOptimizationLevel(GraphOptimizationLevel::ORT_ENABLE_BASIC);
        session_ = std::make_unique<Ort::Session>(env_, manifest.weights_path.c_str(), opts);
        Ort::AllocatorWithDefaultOptions alloc;
        input_name_ = session_->GetInputNameAllocated(0, alloc).get();
    }

    std::vector<double> infer(const InputTensor& tensor) const override {
        const auto n = static_cast<std::int64_t>(tensor.height), w = static_cast<std::int64_t>(tensor.width);
        std::array<std::int64_t, 4> shape = tensor.layout == TensorLayout::NCHW ? std::array<std::int64_t, 4>{1, 3, n, w}
                                                                                : std::array<std::int64_t, 4>{1, n, w, 3};
        auto mem = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
        auto input = Ort::Value::CreateTensor<float>(mem, const_cast<float*>(tensor.values.data()), tensor.values.size(),
                                                     shape.data(), shape.size());
        const char* in_names[] = {input_name_.c_str()};
        const char* out_names[] = {output_name_.c_str()};
        auto outputs = session_->Run(Ort::RunOptions{nullptr}, in_names, &input, 1, out_names, 1);
        auto info = outputs.front().GetTensorTypeAndShapeInfo();
        const float* data = outputs.front().GetTensorData<float>();
        return std::vector<double>(data, data + info.GetElementCount());
    }

private:
    Ort::Env env_;
    std::unique_ptr<Ort::Session> session_;
    std::string input_name_;
    std::string output_name_;
};

#endif

inline bool interchange_backend_available() noexcept {
#ifdef ABR_HAVE_ONNXRUNTIME
    return true;
#else
    return false;
#endif
}

inline std::shared_ptr<const InferenceBackend> make_backend(BackendKind kind, const ModelManifest& manifest) {
    if (kind == BackendKind::Mock) return std::make_shared<MockBackend>(MockBackend::from_file(manifest.weights_path));
#ifdef ABR_HAVE_ONNXRUNTIME
    return std::make_shared<OnnxBackend>(manifest);
#else
    throw Error("interchange backend unavailable: this build lacks ONNX Runtime (configure with -DABR_WITH_ONNXRUNTIME=ON)");
#endif
}

} // namespace abr

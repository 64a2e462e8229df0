#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "abr/feature_cache.hpp"
#include "abr/svm.hpp"

namespace abr {

inline constexpr std::string_view svm_magic = "ABRSVM";
inline constexpr std::uint32_t svm_format_version = 1;

/// Layout (little-endian): magic `ABRSVM`, u32 version, u8 kernel kind, f64 gamma,
/// u64 dim, dim f64 means, dim f64 stds, u64 n_sv, n_sv*dim f64 support vectors
/// (row-major), n_sv f64 dual coefficients, f64 bias, u64 FNV-1a checksum.
inline std::vector<std::byte> encode_svm(const TrainedSvm& m) {
    const std::size_t dim = m.feature_dim();
    if (m.support_vectors.rows() != m.dual_coeffs.size() || (m.support_vectors.rows() > 0 && m.support_vectors.cols() != dim))
        throw Error("encode_svm: inconsistent model shapes");
    binio::Writer w;
    w.bytes(svm_magic);
    w.u32(svm_format_version);
    w.bytes(std::string(1, static_cast<char>(m.kernel.kind)));
    w.f64(m.kernel.gamma);
    w.u64(dim);
    for (double v : m.standardizer.means) w.f64(v);
    for (double v : m.standardizer.stds) w.f64(v);
    w.u64(m.dual_coeffs.size());
    for (double v : m.support_vectors.data()) w.f64(v);
    for (double v : m.dual_coeffs) w.f64(v);
    w.f64(m.bias);
    w.seal();
    return w.data();
}

inline TrainedSvm decode_svm(std::span<const std::byte> data, const std::string& what = "svm model") {
    binio::Reader r(binio::verified_body(data, what), what);
    if (r.bytes(svm_magic.size()) != svm_magic) throw Error(what + ": not an svm model file");
    if (auto v = r.u32(); v != svm_format_version) throw Error(what + ": unsupported format version " + std::to_string(v));
    TrainedSvm m;
    auto kind = static_cast<unsigned char>(r.bytes(1)[0]);
    if (kind > 1) throw Error(what + ": unknown kernel kind");
    m.kernel.kind = static_cast<KernelKind>(kind);
    m.kernel.gamma = r.f64();
    const auto dim = r.u64();
    if (dim > r.remaining() / 16) throw Error(what + ": implausible feature dimension");
    m.standardizer.means.resize(dim);
    m.standardizer.stds.resize(dim);
    for (auto& v : m.standardizer.means) v = r.f64();
    for (auto& v : m.standardizer.stds) v = r.f64();
    const auto n_sv = r.u64();
    if (dim > 0 && n_sv > r.remaining() / (8 * dim)) throw Error(what + ": implausible support vector count");
    m.support_vectors = Matrix(n_sv, dim);
    for (std::size_t i = 0; i < n_sv; ++i)
        for (auto& v : m.support_vectors.row(i)) v = r.f64();
    m.dual_coeffs.resize(n_sv);
    for (auto& v : m.dual_coeffs) v = r.f64();
    m.bias = r.f64();
    if (r.remaining() != 0) throw Error(what + ": trailing bytes");
    return m;
}

inline void save_svm(const TrainedSvm& m, const std::filesystem::path& path) {
    binio::write_file_atomic(path, encode_svm(m));
}

inline TrainedSvm load_svm(const std::filesystem::path& path) {
    return decode_svm(binio::read_file(path), path.string());
}

} // namespace abr

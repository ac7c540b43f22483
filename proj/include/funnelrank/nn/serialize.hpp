// Copyright (c) 2026 The funnelrank Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Parameter files: a JSON manifest listing name, shape, and element offset of
// each tensor, plus one blob of little-endian IEEE-754 binary64 values in
// row-major order. Both halves round-trip bit for bit.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::nn {

inline constexpr const char* kParameterFormat = "funnelrank-params-v1";

namespace detail {

inline void put_le64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
}

inline double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Manifest JSON for `store`; `blob_name` is recorded verbatim.
template <typename Scalar>
nlohmann::json parameter_manifest(const ParameterStore<Scalar>& store, const std::string& blob_name) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : store) {
    entries.push_back({{"name", name},
                       {"shape", {t.value().rows(), t.value().cols()}},
                       {"offset", offset},
                       {"trainable", t.requires_grad()}});
    offset += static_cast<std::uint64_t>(t.size());
  }
  return {{"format", kParameterFormat},
          {"dtype", "float64-le"},
          {"blob", blob_name},
          {"count", offset},
          {"parameters", entries}};
}

template <typename Scalar>
std::vector<unsigned char> parameter_blob(const ParameterStore<Scalar>& store) {
  std::vector<unsigned char> out;
  out.reserve(static_cast<std::size_t>(store.parameter_count()) * 8);
  for (const auto& [_, t] : store) {
    const auto& v = t.value();
    for (Index i = 0; i < v.rows(); ++i)
      for (Index j = 0; j < v.cols(); ++j) detail::put_le64(out, static_cast<double>(v(i, j)));
  }
  return out;
}

template <typename Scalar>
ParameterStore<Scalar> parameters_from(const nlohmann::json& manifest, const std::vector<unsigned char>& blob) {
  if (manifest.value("format", "") != kParameterFormat) {
    throw std::runtime_error("parameter manifest: unsupported format");
  }
  const auto total = manifest.at("count").get<std::uint64_t>();
  if (blob.size() != total * 8) throw std::runtime_error("parameter blob: size does not match manifest");
  ParameterStore<Scalar> store;
  for (const auto& e : manifest.at("parameters")) {
    const auto rows = e.at("shape").at(0).get<Index>();
    const auto cols = e.at("shape").at(1).get<Index>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    if ((offset + static_cast<std::uint64_t>(rows * cols)) > total) {
      throw std::runtime_error("parameter blob: entry out of range");
    }
    Matrix<Scalar> m(rows, cols);
    const unsigned char* p = blob.data() + offset * 8;
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j, p += 8) m(i, j) = static_cast<Scalar>(detail::get_le64(p));
    store.add(e.at("name").get<std::string>(), std::move(m), e.value("trainable", true));
  }
  return store;
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`.
template <typename Scalar>
void save_parameters(const ParameterStore<Scalar>& store, const std::filesystem::path& dir,
                     const std::string& stem = "params") {
  std::filesystem::create_directories(dir);
  const std::string blob_name = stem + ".bin";
  {
    std::ofstream out(dir / (stem + ".json"));
    out << parameter_manifest(store, blob_name).dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write parameter manifest in " + dir.string());
  }
  const auto blob = parameter_blob(store);
  std::ofstream out(dir / blob_name, std::ios::binary);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("cannot write parameter blob in " + dir.string());
}

template <typename Scalar>
ParameterStore<Scalar> load_parameters(const std::filesystem::path& dir, const std::string& stem = "params") {
  std::ifstream in(dir / (stem + ".json"));
  if (!in) throw std::runtime_error("cannot read parameter manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  std::ifstream bin(dir / manifest.at("blob").get<std::string>(), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read parameter blob in " + dir.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  return parameters_from<Scalar>(manifest, blob);
}

}  // namespace funnelrank::nn

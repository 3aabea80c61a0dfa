#pragma once

#include <gtest/gtest.h>

#include <optional>

#include "compass/compass.hpp"

namespace support {

// Error code raised by f, or nullopt if it returned normally.
template <typename F>
std::optional<compass::Errc> code_of(F&& f) {
  try {
    f();
  } catch (const compass::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline compass::EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  compass::Rng rng(seed);
  std::vector<float> data(n * d);
  std::vector<double> v(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : v) x = rng.normal();
    compass::normalize_into(v, std::span<float>(data.data() + i * d, d));
  }
  return {d, n, std::move(data)};
}

inline compass::EmbeddingMatrix rows(std::size_t d, std::vector<std::vector<double>> vs) {
  std::vector<float> data(vs.size() * d);
  for (std::size_t i = 0; i < vs.size(); ++i) compass::normalize_into(vs[i], std::span<float>(data.data() + i * d, d));
  return {d, vs.size(), std::move(data)};
}

inline compass::Dataset with_roles(const compass::EmbeddingMatrix& x, const std::vector<compass::Role>& roles) {
  compass::Dataset ds;
  for (std::size_t i = 0; i < roles.size(); ++i)
    ds.records.push_back({"r" + std::to_string(i), "xx", roles[i], std::nullopt, std::nullopt});
  ds.embeddings = x;
  return ds;
}

}  // namespace support

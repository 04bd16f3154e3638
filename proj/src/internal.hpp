#pragma once

#include "gdid/learners.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace gdid {

// Mean target of the k nearest training units in standardized feature space.
ModelPtr fit_knn(const Matrix& features, const Vector& targets, int k);

ModelPtr fit_boosted_stumps(const Matrix& features, const Vector& targets, int rounds, double shrinkage,
                            bool probability);

// Lawson-Hanson active set solver for min ||A x - b|| subject to x >= 0.
Vector nnls(const Matrix& a, const Vector& b, int max_iterations = 0);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_no;

  std::size_t col(const std::string& name) const;  // throws InvalidArgument when absent
};

CsvTable read_csv(const std::string& path);
double parse_real(const std::string& cell, const std::string& what);
int parse_int(const std::string& cell, const std::string& what);
int parse_treatment(const std::string& cell, const std::string& unit);  // NonBinaryTreatment

// splitmix64 finalizer; combines a base seed with stream labels.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

std::mt19937_64 make_rng(std::uint64_t seed);

// Runs body(i) for i in [0, count) on up to `threads` workers. Callers write
// results into per-index slots, so the output never depends on scheduling.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace gdid

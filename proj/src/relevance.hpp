#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace bf {

// Normalized per-block importance scores; index 0 is the embedding block.
struct BlockRelevance {
  std::vector<double> scores;      // sum to 1, each >= 0
  std::vector<double> raw_scores;  // pre-normalization
  int64_t sample_count = 0;
};

// Per-block mean of relu(concat * concat_grad) for one sample, averaged over
// atoms and the feature dimension of each width-d partition.
std::vector<double> relevance_slice_means(const Tensor& concat, const Tensor& concat_grad,
                                          int blocks, int width);

// Gradient-times-activation block scoring: runs the full loss on each sample,
// takes the loss gradient at the concatenated features, rectifies the
// elementwise product, partitions per block and averages over features,
// atoms and samples before normalizing.
BlockRelevance block_relevance(const Checkpoint& checkpoint, const Dataset& samples,
                               const LossWeights& weights, int64_t max_samples = 1000);

// CSV rows `block_index,label,score` with labels f1..f_b and 6-decimal scores.
void relevance_report(const BlockRelevance& relevance, const std::string& path);

}  // namespace bf

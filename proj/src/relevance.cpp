#include "relevance.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace bf {

std::vector<double> relevance_slice_means(const Tensor& concat, const Tensor& concat_grad,
                                          int blocks, int width) {
  require(concat.same_shape(concat_grad), Error::Kind::InvalidArgument,
          "features and gradient must have the same shape");
  require(concat.cols() == static_cast<int64_t>(blocks) * width, Error::Kind::InvalidArgument,
          "concat width must equal blocks*width");
  const int64_t n = concat.rows();
  std::vector<double> means(static_cast<size_t>(blocks), 0.0);
  for (int b = 0; b < blocks; ++b) {
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < width; ++j) {
        const double v = concat.at(i, b * width + j) * concat_grad.at(i, b * width + j);
        if (v > 0.0) acc += v;
      }
    means[static_cast<size_t>(b)] = acc / static_cast<double>(n * width);
  }
  return means;
}

BlockRelevance block_relevance(const Checkpoint& ckpt, const Dataset& samples,
                               const LossWeights& weights, int64_t max_samples) {
  require(samples.size() >= 1, Error::Kind::InvalidArgument, "relevance needs >= 1 sample");
  require(max_samples >= 1, Error::Kind::InvalidArgument, "max_samples must be >= 1");
  const int blocks = static_cast<int>(ckpt.config.blocks);
  const int width = static_cast<int>(ckpt.config.node_width);
  const int64_t used = std::min<int64_t>(samples.size(), max_samples);

  BlockRelevance out;
  out.sample_count = used;
  out.raw_scores.assign(static_cast<size_t>(blocks), 0.0);
  for (int64_t s = 0; s < used; ++s) {
    const MolecularSample& sample = samples.samples[static_cast<size_t>(s)];
    EdgeList edges = build_edges(sample, ckpt.config.cutoff);
    Tape tape;
    ForwardGraph graph = build_forward(tape, ckpt, sample, edges);
    LossVars loss = build_loss(tape, graph, sample, weights);
    tape.backward(loss.total);
    const Tensor& f = tape.value(graph.concat);
    const Tensor& g = tape.grad(graph.concat);
    require(f.all_finite() && g.all_finite(), Error::Kind::Numeric,
            "non-finite relevance gradient at sample " + std::to_string(s));
    const std::vector<double> means = relevance_slice_means(f, g, blocks, width);
    for (int b = 0; b < blocks; ++b) out.raw_scores[static_cast<size_t>(b)] += means[static_cast<size_t>(b)];
  }
  for (double& v : out.raw_scores) v /= static_cast<double>(used);

  double total = 0.0;
  for (double v : out.raw_scores) total += v;
  require(total > 0.0, Error::Kind::Numeric,
          "degenerate relevance: all raw scores are zero, normalization undefined");
  out.scores.resize(out.raw_scores.size());
  for (size_t i = 0; i < out.raw_scores.size(); ++i) out.scores[i] = out.raw_scores[i] / total;
  return out;
}

void relevance_report(const BlockRelevance& relevance, const std::string& path) {
  require(!relevance.scores.empty(), Error::Kind::InvalidArgument, "empty relevance");
  std::string text = "block_index,label,score\n";
  char buf[64];
  for (size_t i = 0; i < relevance.scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,f%zu,%.6f\n", i, i + 1, relevance.scores[i]);
    text += buf;
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::Io, "cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), Error::Kind::Io, "write failed: " + path);
}

}  // namespace bf

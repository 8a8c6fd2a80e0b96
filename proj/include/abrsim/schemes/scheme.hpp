#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abrsim/control.hpp"
#include "abrsim/media.hpp"

namespace abrsim {

/// Read-only view handed to a scheme once per chunk.
struct DecisionContext {
  std::size_t chunk_index = 0;
  double buffer = 0.0;         // x_t, seconds
  double clock = 0.0;          // session clock, seconds
  double est_bandwidth = 0.0;  // kbps
  std::optional<int> last_level;
  int allowed_top = 1;  // allowed levels at this position are 1..allowed_top
  const VideoManifest* manifest = nullptr;
  std::span<const int> allowed_tops;  // per position; empty means unfiltered
  bool playing = false;        // playback has started
  int playing_indicator = 0;   // playing and buffer >= one chunk
  std::span<const double> chunk_throughputs;  // observed kbps of completed chunks

  const VideoManifest& video() const { return *manifest; }
  double chunk_duration() const { return manifest->chunk_duration_s; }
  std::size_t remaining() const { return manifest->num_chunks() - chunk_index; }

  int top_at(std::size_t position) const {
    if (allowed_tops.empty()) return manifest->num_levels();
    return allowed_tops[position];
  }
};

struct Decision {
  int level = 1;
  std::optional<double> u;  // controller output, control-based schemes only
};

class AbrScheme {
 public:
  virtual ~AbrScheme() = default;

  virtual std::string name() const = 0;
  virtual Decision decide(const DecisionContext& ctx) = 0;

  // Buffer trajectory since the previous decision. Controllers integrate it.
  virtual void observe(std::span<const BufferSample>) {}

  /// Objective evaluations performed so far (complexity instrumentation).
  std::uint64_t evaluations() const noexcept { return evaluations_; }

 protected:
  std::uint64_t evaluations_ = 0;
};

/// Replays a predetermined level sequence. Used by the oracles.
class FixedSequenceScheme final : public AbrScheme {
 public:
  explicit FixedSequenceScheme(std::vector<int> levels, std::string label = "fixed")
      : levels_(std::move(levels)), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  Decision decide(const DecisionContext& ctx) override {
    if (ctx.chunk_index >= levels_.size()) throw SimulationError("fixed sequence shorter than video");
    return {levels_[ctx.chunk_index], std::nullopt};
  }

 private:
  std::vector<int> levels_;
  std::string label_;
};

// Highest level in [1, top] whose value in `rates` (indexed level-1) is <= budget, else 1.
inline int highest_level_at_most(std::span<const double> rates, int top, double budget) {
  int best = 1;
  for (int l = 1; l <= top; ++l)
    if (rates[static_cast<std::size_t>(l - 1)] <= budget) best = l;
  return best;
}

}  // namespace abrsim

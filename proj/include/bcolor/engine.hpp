#pragma once

#include "bcolor/bits.hpp"
#include "bcolor/graph.hpp"
#include "bcolor/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bcolor {

using Color = int32_t;
inline constexpr Color kNoColor = 0;  // colors are 1..Delta+1

enum class Mode { BCongest, BCStream };

struct Fault {
  enum class Kind { Bandwidth, Memory, Contract, Delivery, Relabel, Bucketing, Matching, PutAside, Precondition, Prefix, Config, Decomposition };
  Kind kind = Kind::Contract;
  std::string stage;
  NodeId node = -1;
  int64_t round = 0;
  int64_t value = 0;
  std::string detail;
};

const char* fault_kind_name(Fault::Kind k);
std::string describe(const Fault& f);

class FaultError : public std::runtime_error {
 public:
  explicit FaultError(Fault f) : std::runtime_error(describe(f)), fault_(std::move(f)) {}
  const Fault& fault() const { return fault_; }

 private:
  Fault fault_;
};

struct StageMetrics {
  std::string stage;
  int64_t rounds = 0;
  int64_t max_bits = 0;
  int64_t colored = 0;
  int64_t faults = 0;
  int64_t peak_words = 0;
  int64_t fallback = 0;
};

struct EngineOptions {
  int c_bw = 8;
  int c_mem = 4;
  Mode mode = Mode::BCongest;
  bool strict = false;
  int threads = 1;
  uint64_t seed = 0;
};

class MemoryMeter {
 public:
  void reset(int64_t baseline) {
    in_use_ = baseline;
    peak_ = baseline;
  }
  void charge(int64_t words) {
    in_use_ += words;
    peak_ = std::max(peak_, in_use_);
  }
  void release(int64_t words) { in_use_ -= words; }
  int64_t in_use() const { return in_use_; }
  int64_t peak() const { return peak_; }

 private:
  int64_t in_use_ = 0;
  int64_t peak_ = 0;
};

class Engine;

// Per-node view handed to handlers for one phase of one round.
struct NodeCtx {
  NodeId id;
  int64_t round;
  MemoryMeter& mem;
  const Engine& engine;
  Rng rng(std::string_view tag) const;
};

// Single-pass inbox: each message is handed out once, in arrival order.
class Inbox {
 public:
  Inbox(const Engine& e, const std::vector<NodeId>& order) : engine_(e), order_(order) {}
  template <class F>
  void for_each(F&& f);

 private:
  const Engine& engine_;
  const std::vector<NodeId>& order_;
};

class Engine {
 public:
  Engine(const Graph& g, EngineOptions opt);

  const Graph& graph() const { return g_; }
  const EngineOptions& options() const { return opt_; }
  NodeId n() const { return g_.n(); }
  int log_n() const { return log_n_; }
  int64_t bandwidth_bits() const { return static_cast<int64_t>(opt_.c_bw) * log_n_; }
  int64_t memory_budget_words() const {
    return static_cast<int64_t>(opt_.c_mem) * log_n_ * log_n_ * log_n_;
  }
  int color_bits() const { return bits_for(static_cast<uint64_t>(g_.max_degree()) + 2); }
  int64_t round() const { return round_; }
  bool streaming() const { return opt_.mode == Mode::BCStream; }

  // Stage bookkeeping; rounds of every stage sum to round().
  void begin_stage(const std::string& name);
  void end_stage();
  const std::vector<StageMetrics>& stages() const { return stages_; }
  StageMetrics& current_stage() { return stages_.back(); }
  const std::vector<Fault>& faults() const { return faults_; }
  void record_fault(Fault f);

  // Coloring, monotone. Newly set colors ride along the node's next broadcast.
  Color color(NodeId v) const { return color_[v]; }
  const std::vector<Color>& colors() const { return color_; }
  void set_color(NodeId v, Color c);
  int64_t colored_count() const { return colored_total_; }
  int64_t colored_round(NodeId v) const { return colored_round_[v]; }
  bool has_pending_announcements() const;

  // What node v has learned about its neighbors' colors.
  void set_groups(std::vector<int> groups) { groups_ = std::move(groups); }
  int group(NodeId v) const { return groups_.empty() ? -1 : groups_[v]; }
  bool known_used(NodeId v, Color c) const { return test_bit(used_all_, v, c); }
  bool known_used_in_group(NodeId v, Color c) const { return test_bit(used_group_, v, c); }
  int64_t palette_view_words() const;

  // One synchronous round. senders/listeners == nullptr means every node.
  template <class Send, class Recv>
  void round(const std::vector<NodeId>* senders, Send&& send, const std::vector<NodeId>* listeners, Recv&& recv);

  // Empty round that only delivers pending color announcements.
  void flush();

  // Deterministic work splitting. fn(begin, end, worker).
  void parallel_for(size_t count, const std::function<void(size_t, size_t, int)>& fn) const;

  std::vector<NodeId>& scratch(int worker) { return scratch_[worker]; }

 private:
  friend class Inbox;
  friend struct NodeCtx;

  bool test_bit(const std::vector<uint64_t>& bits, NodeId v, Color c) const {
    return (bits[static_cast<size_t>(v) * words_per_node_ + (c >> 6)] >> (c & 63)) & 1ULL;
  }
  void deliver_announcements();
  void finish_send_phase(const std::vector<std::vector<Fault>>& local);
  void finish_recv_phase(const std::vector<std::vector<Fault>>& local, const std::vector<int64_t>& peaks);

  const Graph& g_;
  EngineOptions opt_;
  int log_n_;
  int64_t round_ = 0;
  std::vector<StageMetrics> stages_;
  std::vector<Fault> faults_;
  int64_t stage_colored_start_ = 0;

  std::vector<Color> color_;
  std::vector<int64_t> colored_round_;
  std::vector<Color> pending_;
  std::atomic<int64_t> colored_total_{0};

  std::vector<int> groups_;
  size_t words_per_node_;
  std::vector<uint64_t> used_all_;
  std::vector<uint64_t> used_group_;

  std::vector<BitWriter> out_;
  std::vector<uint8_t> has_payload_;
  std::vector<int64_t> bits_sent_;
  std::vector<std::vector<NodeId>> scratch_;
  std::vector<NodeId> all_nodes_;
};

inline Rng NodeCtx::rng(std::string_view tag) const {
  return derive_rng(engine.options().seed, static_cast<uint64_t>(id), static_cast<uint64_t>(round), tag);
}

template <class F>
void Inbox::for_each(F&& f) {
  for (NodeId u : order_) {
    BitReader r(engine_.out_[u]);
    f(u, r);
  }
}

template <class Send, class Recv>
void Engine::round(const std::vector<NodeId>* senders, Send&& send, const std::vector<NodeId>* listeners,
                   Recv&& recv) {
  ++round_;
  if (!stages_.empty()) ++stages_.back().rounds;
  const std::vector<NodeId>& snd = senders ? *senders : all_nodes_;
  const std::vector<NodeId>& lst = listeners ? *listeners : all_nodes_;
  const int workers = std::max(1, opt_.threads);
  const int64_t palette_words = streaming() ? palette_view_words() : 0;

  // Send phase.
  std::vector<std::vector<Fault>> local(workers);
  std::vector<int64_t> peaks(workers, 0);
  for (NodeId v : snd) has_payload_[v] = 0;
  parallel_for(snd.size(), [&](size_t b, size_t e, int w) {
    MemoryMeter mem;
    for (size_t i = b; i < e; ++i) {
      const NodeId v = snd[i];
      out_[v].clear();
      mem.reset(palette_words);
      NodeCtx ctx{v, round_, mem, *this};
      send(ctx, out_[v]);
      has_payload_[v] = out_[v].empty() ? 0 : 1;
      peaks[w] = std::max(peaks[w], mem.peak());
      if (streaming() && mem.peak() > memory_budget_words())
        local[w].push_back({Fault::Kind::Memory, "", v, round_, mem.peak(), "send phase"});
    }
  });
  int64_t stage_max_bits = 0;
  for (NodeId v : snd) {
    int64_t bits = 1 + (pending_[v] != kNoColor ? color_bits() : 0) + static_cast<int64_t>(out_[v].size());
    bits_sent_[v] = bits;
    stage_max_bits = std::max(stage_max_bits, bits);
    if (bits > bandwidth_bits())
      local[0].push_back({Fault::Kind::Bandwidth, "", v, round_, bits, "broadcast exceeds budget"});
  }
  if (has_pending_announcements()) stage_max_bits = std::max<int64_t>(stage_max_bits, 1 + color_bits());
  if (!stages_.empty()) stages_.back().max_bits = std::max(stages_.back().max_bits, std::max<int64_t>(1, stage_max_bits));
  finish_send_phase(local);
  deliver_announcements();

  // Receive phase.
  for (auto& l : local) l.clear();
  parallel_for(lst.size(), [&](size_t b, size_t e, int w) {
    MemoryMeter mem;
    std::vector<NodeId>& order = scratch_[w];
    for (size_t i = b; i < e; ++i) {
      const NodeId v = lst[i];
      order.clear();
      for (NodeId u : g_.neighbors(v))
        if (has_payload_[u]) order.push_back(u);
      if (streaming() && order.size() > 1) {
        Rng r = derive_rng(opt_.seed, static_cast<uint64_t>(v), static_cast<uint64_t>(round_), hash_tag("inbox-order"));
        r.shuffle(order);
      }
      mem.reset(palette_words);
      NodeCtx ctx{v, round_, mem, *this};
      Inbox inbox(*this, order);
      recv(ctx, inbox);
      peaks[w] = std::max(peaks[w], mem.peak());
      if (streaming() && mem.peak() > memory_budget_words())
        local[w].push_back({Fault::Kind::Memory, "", v, round_, mem.peak(), "receive phase"});
    }
  });
  for (NodeId v : snd) {
    has_payload_[v] = 0;
  }
  finish_recv_phase(local, peaks);
}

}  // namespace bcolor

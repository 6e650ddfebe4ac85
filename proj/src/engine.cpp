#include "bcolor/engine.hpp"

#include <exception>
#include <sstream>

namespace bcolor {

const char* fault_kind_name(Fault::Kind k) {
  switch (k) {
    case Fault::Kind::Bandwidth: return "bandwidth";
    case Fault::Kind::Memory: return "memory";
    case Fault::Kind::Contract: return "contract";
    case Fault::Kind::Delivery: return "delivery";
    case Fault::Kind::Relabel: return "relabel";
    case Fault::Kind::Bucketing: return "bucketing";
    case Fault::Kind::Matching: return "matching";
    case Fault::Kind::PutAside: return "putaside";
    case Fault::Kind::Precondition: return "precondition";
    case Fault::Kind::Prefix: return "prefix";
    case Fault::Kind::Config: return "config";
    case Fault::Kind::Decomposition: return "decomposition";
  }
  return "unknown";
}

std::string describe(const Fault& f) {
  std::ostringstream os;
  os << fault_kind_name(f.kind) << " fault";
  if (!f.stage.empty()) os << " in stage " << f.stage;
  if (f.node >= 0) os << " at node " << f.node;
  os << " round " << f.round << " value " << f.value;
  if (!f.detail.empty()) os << ": " << f.detail;
  return os.str();
}

Engine::Engine(const Graph& g, EngineOptions opt)
    : g_(g), opt_(opt), log_n_(ceil_log2(static_cast<uint64_t>(std::max<NodeId>(g.n(), 2)))) {
  const NodeId n = g.n();
  color_.assign(n, kNoColor);
  colored_round_.assign(n, -1);
  pending_.assign(n, kNoColor);
  words_per_node_ = (static_cast<size_t>(g.max_degree()) + 2 + 63) / 64;
  used_all_.assign(static_cast<size_t>(n) * words_per_node_, 0);
  used_group_.assign(static_cast<size_t>(n) * words_per_node_, 0);
  out_.resize(n);
  has_payload_.assign(n, 0);
  bits_sent_.assign(n, 0);
  scratch_.resize(std::max(1, opt_.threads));
  all_nodes_.resize(n);
  for (NodeId v = 0; v < n; ++v) all_nodes_[v] = v;
}

void Engine::begin_stage(const std::string& name) {
  StageMetrics m;
  m.stage = name;
  stages_.push_back(m);
  stage_colored_start_ = colored_total_;
}

void Engine::end_stage() {
  if (stages_.empty()) return;
  stages_.back().colored = colored_total_ - stage_colored_start_;
  stage_colored_start_ = colored_total_;
}

void Engine::record_fault(Fault f) {
  if (f.stage.empty() && !stages_.empty()) f.stage = stages_.back().stage;
  if (f.round == 0) f.round = round_;
  if (!stages_.empty()) ++stages_.back().faults;
  faults_.push_back(f);
}

void Engine::set_color(NodeId v, Color c) {
  if (c < 1 || c > g_.max_degree() + 1)
    throw FaultError({Fault::Kind::Contract, stages_.empty() ? "" : stages_.back().stage, v, round_, c,
                      "color outside [Delta+1]"});
  if (color_[v] != kNoColor)
    throw FaultError({Fault::Kind::Contract, stages_.empty() ? "" : stages_.back().stage, v, round_, c,
                      "node already colored; colors are monotone"});
  color_[v] = c;
  colored_round_[v] = round_;
  pending_[v] = c;
  colored_total_.fetch_add(1, std::memory_order_relaxed);
}

bool Engine::has_pending_announcements() const {
  for (Color c : pending_)
    if (c != kNoColor) return true;
  return false;
}

int64_t Engine::palette_view_words() const {
  return (2 * (static_cast<int64_t>(g_.max_degree()) + 1) + log_n_ - 1) / log_n_;
}

void Engine::deliver_announcements() {
  for (NodeId u = 0; u < g_.n(); ++u) {
    const Color c = pending_[u];
    if (c == kNoColor) continue;
    const int gu = group(u);
    for (NodeId w : g_.neighbors(u)) {
      const size_t idx = static_cast<size_t>(w) * words_per_node_ + (c >> 6);
      used_all_[idx] |= 1ULL << (c & 63);
      if (gu >= 0 && group(w) == gu) used_group_[idx] |= 1ULL << (c & 63);
    }
    pending_[u] = kNoColor;
  }
}

void Engine::finish_send_phase(const std::vector<std::vector<Fault>>& local) {
  std::vector<Fault> merged;
  for (const auto& l : local) merged.insert(merged.end(), l.begin(), l.end());
  std::sort(merged.begin(), merged.end(), [](const Fault& a, const Fault& b) { return a.node < b.node; });
  for (auto& f : merged) record_fault(f);
  if (opt_.strict && !merged.empty()) throw FaultError(faults_[faults_.size() - merged.size()]);
}

void Engine::finish_recv_phase(const std::vector<std::vector<Fault>>& local, const std::vector<int64_t>& peaks) {
  int64_t peak = 0;
  for (int64_t p : peaks) peak = std::max(peak, p);
  if (!stages_.empty()) stages_.back().peak_words = std::max(stages_.back().peak_words, peak);
  std::vector<Fault> merged;
  for (const auto& l : local) merged.insert(merged.end(), l.begin(), l.end());
  std::sort(merged.begin(), merged.end(), [](const Fault& a, const Fault& b) { return a.node < b.node; });
  for (auto& f : merged) record_fault(f);
  if (opt_.strict && !merged.empty()) throw FaultError(faults_[faults_.size() - merged.size()]);
}

void Engine::flush() {
  if (!has_pending_announcements()) return;
  static const std::vector<NodeId> none;
  round(
      &none, [](NodeCtx&, BitWriter&) {}, &none, [](NodeCtx&, Inbox&) {});
}

void Engine::parallel_for(size_t count, const std::function<void(size_t, size_t, int)>& fn) const {
  const int workers = std::max(1, opt_.threads);
  if (workers == 1 || count < 64) {
    fn(0, count, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const size_t b = std::min(count, chunk * w), e = std::min(count, chunk * (w + 1));
    if (b >= e) break;
    pool.emplace_back([&fn, &errors, b, e, w] {
      try {
        fn(b, e, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace bcolor

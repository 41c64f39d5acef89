#include "wbpsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wbpsim {

namespace {

std::string indexed(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", prefix, i);
  return buf;
}

template <typename T>
const T& payload_as(const Token& t, const TaskSpec& spec) {
  if (const T* p = std::get_if<T>(&t.payload)) return *p;
  throw ContractViolation("task '" + spec.id + "': unexpected input payload type");
}

// Input token coming from the task with id `src` (or EXTERNAL).
const Token& input_from(const Dag& dag, const std::vector<std::pair<std::size_t, Token>>& inputs,
                        std::string_view src, const TaskSpec& spec) {
  for (const auto& [e, tok] : inputs) {
    if (dag.edges()[e].src == src) return tok;
  }
  throw ContractViolation("task '" + spec.id + "': missing input from '" + std::string(src) + "'");
}

double noise_variance(const LinkConfig& cfg) {
  // Min-sum decoding is scale invariant; any positive value works for the
  // noiseless case.
  if (std::isinf(cfg.snr_db)) return 1e-3;
  return std::pow(10.0, -cfg.snr_db / 10.0);
}

CplxVec modulate_symbols(std::span<const Cplx> freq, const OfdmConfig& ofdm) {
  CplxVec out;
  out.reserve(freq.size() / ofdm.n_subcarriers * ofdm.symbol_len());
  for (std::size_t s = 0; s < freq.size(); s += ofdm.n_subcarriers) {
    const CplxVec sym = ofdm_modulate(freq.subspan(s, ofdm.n_subcarriers), ofdm);
    out.insert(out.end(), sym.begin(), sym.end());
  }
  return out;
}

CplxVec demodulate_symbols(std::span<const Cplx> time, const OfdmConfig& ofdm) {
  if (time.size() % ofdm.symbol_len() != 0) throw std::invalid_argument("ofdm: sample count is not whole symbols");
  CplxVec out;
  out.reserve(time.size() / ofdm.symbol_len() * ofdm.n_subcarriers);
  for (std::size_t s = 0; s < time.size(); s += ofdm.symbol_len()) {
    const CplxVec sym = ofdm_demodulate(time.subspan(s, ofdm.symbol_len()), ofdm);
    out.insert(out.end(), sym.begin(), sym.end());
  }
  return out;
}

CplxVec equalize_grid(std::span<const Cplx> grid, std::span<const Cplx> H, std::size_t nsc) {
  CplxVec out;
  out.reserve(grid.size());
  for (std::size_t s = 0; s < grid.size(); s += nsc) {
    const ZfResult z = zf_equalize(grid.subspan(s, nsc), H);
    out.insert(out.end(), z.symbols.begin(), z.symbols.end());
  }
  return out;
}

LlrVec per_user(std::span<const double> llr, std::size_t seg, const std::function<LlrVec(std::span<const double>, std::size_t)>& f) {
  if (llr.size() % seg != 0) throw std::invalid_argument("LLR stream is not a whole number of user segments");
  LlrVec out;
  for (std::size_t u = 0; u * seg < llr.size(); ++u) {
    const LlrVec part = f(llr.subspan(u * seg, seg), u);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

WorkItem work(KernelKind k, std::size_t size, std::size_t count = 1, double scale = 1.0) {
  if (size == 0) return WorkItem{k, 1, 0, scale};
  return WorkItem{k, size, count, scale};
}

}  // namespace

void LinkConfig::validate() const {
  if (N < 2 || !is_power_of_two(N)) throw std::invalid_argument("N must be a power of two >= 2");
  if (K == 0 || K > N) throw std::invalid_argument("K must be within [1, N]");
  ofdm.validate();
  if (E == 0 || E % 2 != 0 || (E / 2) % ofdm.n_subcarriers != 0) {
    throw std::invalid_argument("E must fill whole OFDM symbols: (E/2) % n_subcarriers == 0");
  }
  if (bp_iters == 0) throw std::invalid_argument("bp_iters must be >= 1");
  if (users_per_slot > kMaxUsersPerSlot) throw std::invalid_argument("users_per_slot must be <= 20");
  if (std::isnan(snr_db)) throw std::invalid_argument("snr_db must be a number");
  if (std::abs(gain) < kDegenerateEps) throw std::invalid_argument("gain must be non-zero");
}

CplxVec pilot_symbol(const LinkConfig& cfg) {
  return qpsk_mod(gold_sequence(cfg.pilot_seed, 2 * cfg.ofdm.n_subcarriers));
}

std::size_t code_bytes_for(KernelKind k) {
  switch (k) {
    case KernelKind::BpDecode: return 2048;
    case KernelKind::Fft:
    case KernelKind::OfdmModulate:
    case KernelKind::OfdmDemodulate: return 1536;
    case KernelKind::PolarEncode:
    case KernelKind::BlindDetect: return 1024;
    case KernelKind::Scramble:
    case KernelKind::Descramble:
    case KernelKind::QpskDemod: return 768;
    case KernelKind::RateMatch:
    case KernelKind::RateRecover:
    case KernelKind::QpskMod:
    case KernelKind::LsEstimate:
    case KernelKind::ZfEqualize: return 512;
    case KernelKind::SlotAssembly:
    case KernelKind::Aggregate: return 256;
  }
  return 512;
}

Dag build_tx_dag(const LinkConfig& cfg) {
  cfg.validate();
  if (cfg.users_per_slot == 0) throw std::invalid_argument("TX DAG needs at least one user");
  Dag dag;
  auto task = [&](const std::string& id, KernelKind k, int param, Attribute a) {
    dag.add_task(TaskSpec{id, KernelRef{k, param}, a, code_bytes_for(k)});
  };
  task("asm", KernelKind::SlotAssembly, -1, Attribute::Small);
  for (std::size_t u = 0; u < cfg.users_per_slot; ++u) {
    const int p = static_cast<int>(u);
    const auto enc = indexed("enc", u), rm = indexed("rm", u), scr = indexed("scr", u), mod = indexed("mod", u),
               ofdm = indexed("ofdm", u);
    task(enc, KernelKind::PolarEncode, p, Attribute::Small);
    task(rm, KernelKind::RateMatch, p, Attribute::Small);
    task(scr, KernelKind::Scramble, p, Attribute::Small);
    task(mod, KernelKind::QpskMod, p, Attribute::Small);
    task(ofdm, KernelKind::OfdmModulate, p, Attribute::Large);
    dag.add_edge(kExternal, enc);
    dag.add_edge(enc, rm);
    dag.add_edge(rm, scr);
    dag.add_edge(scr, mod);
    dag.add_edge(mod, ofdm);
    dag.add_edge(ofdm, "asm");
  }
  dag.finalize();
  return dag;
}

Dag build_rx_dag(const LinkConfig& cfg) {
  cfg.validate();
  Dag dag;
  auto task = [&](const std::string& id, KernelKind k, int param, Attribute a) {
    dag.add_task(TaskSpec{id, KernelRef{k, param}, a, code_bytes_for(k)});
  };
  task("ofdm", KernelKind::OfdmDemodulate, -1, Attribute::Large);
  task("est", KernelKind::LsEstimate, -1, Attribute::Any);
  task("eq", KernelKind::ZfEqualize, -1, Attribute::Any);
  task("demod", KernelKind::QpskDemod, -1, Attribute::Small);
  task("dscr", KernelKind::Descramble, -1, Attribute::Small);
  task("rr", KernelKind::RateRecover, -1, Attribute::Small);
  task("bd", KernelKind::BlindDetect, -1, Attribute::Small);
  task("agg", KernelKind::Aggregate, -1, Attribute::Small);
  dag.add_edge(kExternal, "ofdm");
  dag.add_edge("ofdm", "est");
  dag.add_edge("ofdm", "eq");
  dag.add_edge("est", "eq");
  dag.add_edge("eq", "demod");
  dag.add_edge("demod", "dscr");
  dag.add_edge("dscr", "rr");
  dag.add_edge("rr", "bd");
  dag.add_edge(kExternal, "bd");
  DismissalRule rule{"bd", {}, kMaxUsersPerSlot};
  for (std::size_t d = 0; d < kMaxUsersPerSlot; ++d) {
    const auto id = indexed("dec", d);
    task(id, KernelKind::BpDecode, static_cast<int>(d), Attribute::Large);
    dag.add_edge("bd", id);
    dag.add_edge(id, "agg");
    rule.group.push_back(id);
  }
  dag.add_dismissal(std::move(rule));
  dag.finalize();
  return dag;
}

Dag relax_attributes(const Dag& dag, bool has_large, bool has_small) {
  Dag out;
  for (auto t : dag.tasks()) {
    if ((t.attribute == Attribute::Large && !has_large) || (t.attribute == Attribute::Small && !has_small)) {
      t.attribute = Attribute::Any;
    }
    out.add_task(std::move(t));
  }
  for (const auto& e : dag.edges()) out.add_edge(e.src, e.dst, e.capacity);
  for (const auto& r : dag.dismissal_rules()) out.add_dismissal(r);
  out.finalize();
  return out;
}

// ---------------------------------------------------------------- executor

LinkExecutor::LinkExecutor(const LinkConfig& cfg, unsigned bp_anchor_iters)
    : cfg_(cfg),
      code_(PolarCode::bhattacharyya(cfg.N, cfg.K, cfg.design_snr_db)),
      pilot_(pilot_symbol(cfg)),
      bp_anchor_iters_(std::max(1U, bp_anchor_iters)) {
  cfg_.validate();
}

TaskOutcome LinkExecutor::execute(const Dag& dag, std::size_t task,
                                  const std::vector<std::pair<std::size_t, Token>>& inputs) {
  const TaskSpec& spec = dag.tasks()[task];
  const auto& outs = dag.out_edges(task);
  const std::size_t nsc = cfg_.ofdm.n_subcarriers;
  const auto user = static_cast<std::size_t>(std::max(0, spec.kernel.param));
  TaskOutcome o;

  auto single = [&]() -> const Token& {
    if (inputs.size() != 1) throw ContractViolation("task '" + spec.id + "' expects one input");
    return inputs.front().second;
  };
  auto broadcast = [&](Payload p) { o.outputs.assign(std::max<std::size_t>(1, outs.size()), p); };
  if (outs.empty()) o.outputs.clear();

  switch (spec.kernel.kind) {
    case KernelKind::PolarEncode: {
      broadcast(polar_encode(payload_as<BitVec>(single(), spec), code_));
      o.work.push_back(work(KernelKind::PolarEncode, cfg_.N));
      break;
    }
    case KernelKind::RateMatch: {
      broadcast(rate_match_rv0(payload_as<BitVec>(single(), spec), cfg_.E));
      o.work.push_back(work(KernelKind::RateMatch, cfg_.E));
      break;
    }
    case KernelKind::Scramble: {
      broadcast(scramble(payload_as<BitVec>(single(), spec), cfg_.user_c_init(user)));
      o.work.push_back(work(KernelKind::Scramble, cfg_.E));
      break;
    }
    case KernelKind::QpskMod: {
      broadcast(qpsk_mod(payload_as<BitVec>(single(), spec)));
      o.work.push_back(work(KernelKind::QpskMod, cfg_.E / 2));
      break;
    }
    case KernelKind::OfdmModulate: {
      const auto& freq = payload_as<CplxVec>(single(), spec);
      broadcast(modulate_symbols(freq, cfg_.ofdm));
      o.work.push_back(work(KernelKind::Fft, nsc, freq.size() / nsc));
      break;
    }
    case KernelKind::SlotAssembly: {
      CplxVec slot = ofdm_modulate(pilot_, cfg_.ofdm);
      for (const auto& [e, tok] : inputs) {
        const auto& part = payload_as<CplxVec>(tok, spec);
        slot.insert(slot.end(), part.begin(), part.end());
      }
      o.work.push_back(work(KernelKind::SlotAssembly, slot.size()));
      o.work.push_back(work(KernelKind::Fft, nsc));
      o.outputs.assign(std::max<std::size_t>(1, outs.size()), std::move(slot));
      break;
    }
    case KernelKind::OfdmDemodulate:
    case KernelKind::Fft: {
      const auto& time = payload_as<CplxVec>(single(), spec);
      CplxVec grid = demodulate_symbols(time, cfg_.ofdm);
      o.work.push_back(work(KernelKind::Fft, nsc, grid.size() / nsc));
      // The pilot symbol goes to the estimator, the data symbols to the
      // equalizer.
      for (auto e : outs) {
        const auto& dst = dag.edges()[e].dst;
        if (dag.index_of(dst) && dag.task(dst).kernel.kind == KernelKind::LsEstimate) {
          o.outputs.emplace_back(CplxVec(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(nsc)));
        } else {
          o.outputs.emplace_back(CplxVec(grid.begin() + static_cast<std::ptrdiff_t>(nsc), grid.end()));
        }
      }
      if (outs.empty()) o.outputs.emplace_back(std::move(grid));
      break;
    }
    case KernelKind::LsEstimate: {
      broadcast(ls_estimate(payload_as<CplxVec>(single(), spec), pilot_));
      o.work.push_back(work(KernelKind::LsEstimate, nsc));
      break;
    }
    case KernelKind::ZfEqualize: {
      const CplxVec* H = nullptr;
      const CplxVec* grid = nullptr;
      for (const auto& [e, tok] : inputs) {
        const auto& src = dag.edges()[e].src;
        const auto& v = payload_as<CplxVec>(tok, spec);
        if (src != kExternal && dag.task(src).kernel.kind == KernelKind::LsEstimate) {
          H = &v;
        } else {
          grid = &v;
        }
      }
      if (!H || !grid) throw ContractViolation("task '" + spec.id + "' needs a channel estimate and a grid");
      broadcast(equalize_grid(*grid, *H, nsc));
      o.work.push_back(work(KernelKind::ZfEqualize, grid->size()));
      break;
    }
    case KernelKind::QpskDemod: {
      const auto& y = payload_as<CplxVec>(single(), spec);
      broadcast(qpsk_soft_demod(y, noise_variance(cfg_)));
      o.work.push_back(work(KernelKind::QpskDemod, y.size()));
      break;
    }
    case KernelKind::Descramble: {
      const auto& llr = payload_as<LlrVec>(single(), spec);
      broadcast(per_user(llr, cfg_.E, [&](std::span<const double> seg, std::size_t u) {
        return descramble_llr(seg, cfg_.user_c_init(u));
      }));
      o.work.push_back(work(KernelKind::Descramble, llr.size()));
      break;
    }
    case KernelKind::RateRecover: {
      const auto& llr = payload_as<LlrVec>(single(), spec);
      broadcast(per_user(llr, cfg_.E, [&](std::span<const double> seg, std::size_t) {
        return rate_recover_rv0(seg, cfg_.N);
      }));
      o.work.push_back(work(KernelKind::RateRecover, llr.size()));
      break;
    }
    case KernelKind::BlindDetect: {
      const auto truth = payload_as<Scalar>(input_from(dag, inputs, kExternal, spec), spec).value;
      const std::size_t k = blind_detect(static_cast<std::size_t>(std::max<std::int64_t>(0, truth)));
      const LlrVec* llr = nullptr;
      for (const auto& [e, tok] : inputs) {
        if (dag.edges()[e].src != kExternal) llr = &payload_as<LlrVec>(tok, spec);
      }
      if (!llr || llr->size() != k * cfg_.N) {
        throw ContractViolation("task '" + spec.id + "': LLR stream does not match the detected user count");
      }
      for (auto e : outs) {
        const auto& dst = dag.edges()[e].dst;
        const auto d = static_cast<std::size_t>(std::max(0, dag.task(dst).kernel.param));
        if (d < k) {
          o.outputs.emplace_back(LlrVec(llr->begin() + static_cast<std::ptrdiff_t>(d * cfg_.N),
                                        llr->begin() + static_cast<std::ptrdiff_t>((d + 1) * cfg_.N)));
        } else {
          o.outputs.emplace_back(LlrVec{});
        }
      }
      o.return_value = k;
      o.work.push_back(work(KernelKind::BlindDetect, nsc));
      break;
    }
    case KernelKind::BpDecode: {
      const auto& llr = payload_as<LlrVec>(single(), spec);
      const BpResult r = bp_decode_full(llr, code_, BpOptions{cfg_.bp_iters, cfg_.bp_early_exit});
      bp_iterations_ += r.iterations;
      broadcast(r.info);
      o.work.push_back(work(KernelKind::BpDecode, cfg_.N, 1,
                            static_cast<double>(r.iterations) / static_cast<double>(bp_anchor_iters_)));
      break;
    }
    case KernelKind::Aggregate: {
      BitVec all;
      for (const auto& [e, tok] : inputs) {
        const auto& b = payload_as<BitVec>(tok, spec);
        all.insert(all.end(), b.begin(), b.end());
      }
      o.work.push_back(work(KernelKind::Aggregate, all.size()));
      o.outputs.assign(std::max<std::size_t>(1, outs.size()), std::move(all));
      break;
    }
  }
  return o;
}

// ---------------------------------------------------------------- reference chain

CplxVec reference_tx(const LinkConfig& cfg, const PolarCode& code, const std::vector<BitVec>& info) {
  CplxVec slot = ofdm_modulate(pilot_symbol(cfg), cfg.ofdm);
  for (std::size_t u = 0; u < info.size(); ++u) {
    const BitVec coded = polar_encode(info[u], code);
    const BitVec matched = rate_match_rv0(coded, cfg.E);
    const BitVec scr = scramble(matched, cfg.user_c_init(u));
    const CplxVec sym = qpsk_mod(scr);
    const CplxVec time = modulate_symbols(sym, cfg.ofdm);
    slot.insert(slot.end(), time.begin(), time.end());
  }
  return slot;
}

std::vector<BitVec> reference_rx(const LinkConfig& cfg, const PolarCode& code, std::span<const Cplx> samples,
                                 std::size_t users) {
  const std::size_t nsc = cfg.ofdm.n_subcarriers;
  const CplxVec grid = demodulate_symbols(samples, cfg.ofdm);
  if (grid.size() != (1 + users * cfg.symbols_per_user()) * nsc) {
    throw std::invalid_argument("reference_rx: sample count does not match the user count");
  }
  const CplxVec H = ls_estimate(std::span(grid).first(nsc), pilot_symbol(cfg));
  const CplxVec eq = equalize_grid(std::span(grid).subspan(nsc), H, nsc);
  const LlrVec llr = qpsk_soft_demod(eq, noise_variance(cfg));
  std::vector<BitVec> out;
  for (std::size_t u = 0; u < users; ++u) {
    const LlrVec d = descramble_llr(std::span(llr).subspan(u * cfg.E, cfg.E), cfg.user_c_init(u));
    const LlrVec r = rate_recover_rv0(d, cfg.N);
    out.push_back(bp_decode_full(r, code, BpOptions{cfg.bp_iters, cfg.bp_early_exit}).info);
  }
  return out;
}

CplxVec apply_channel(const LinkConfig& cfg, std::span<const Cplx> tx, Rng& rng) {
  CplxVec faded(tx.begin(), tx.end());
  for (auto& v : faded) v *= cfg.gain;
  return awgn_channel(faded, cfg.snr_db, rng);
}

// ---------------------------------------------------------------- TDD

void TddPattern::validate() const {
  if (slots.empty()) throw std::invalid_argument("tdd pattern must not be empty");
  if (slot_cycles == 0) throw std::invalid_argument("slot_cycles must be > 0");
}

std::string format_pattern(const TddPattern& p) {
  std::string s;
  for (std::size_t i = 0; i < p.slots.size(); ++i) {
    if (i) s += ',';
    s += p.slots[i] == SlotKind::Downlink ? 'D' : 'U';
  }
  return s;
}

std::vector<SlotKind> parse_pattern(std::string_view s) {
  std::vector<SlotKind> out;
  for (char c : s) {
    if (c == ',' || c == ' ') continue;
    if (c == 'D' || c == 'd') {
      out.push_back(SlotKind::Downlink);
    } else if (c == 'U' || c == 'u') {
      out.push_back(SlotKind::Uplink);
    } else {
      throw std::invalid_argument("tdd pattern accepts D and U only");
    }
  }
  if (out.empty()) throw std::invalid_argument("tdd pattern must not be empty");
  return out;
}

std::vector<SpawnedThread> spawn_threads(const TddPattern& pattern, std::size_t n_slots, const LinkConfig& link,
                                         const PolarCode& code, const DagPtr& tx_dag, const DagPtr& rx_dag,
                                         std::uint64_t seed) {
  pattern.validate();
  if (n_slots == 0) throw std::invalid_argument("n_slots must be >= 1");
  std::vector<SpawnedThread> out;
  out.reserve(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    Rng rng(mix_seed(seed) ^ mix_seed(s + 1));
    SpawnedThread st;
    st.kind = pattern.slots[s % pattern.slots.size()];
    st.users = link.users_per_slot;
    for (std::size_t u = 0; u < st.users; ++u) {
      BitVec b(link.K);
      for (auto& x : b) x = rng.bit();
      st.info.push_back(std::move(b));
    }
    ThreadDescriptor& td = st.thread;
    td.id = static_cast<ThreadId>(s);
    td.arrival_time = static_cast<Cycles>(s) * pattern.slot_cycles;
    td.dag = st.kind == SlotKind::Downlink ? tx_dag : rx_dag;
    if (!td.dag) throw std::invalid_argument("spawn_threads: missing DAG for slot kind");
    const Dag& dag = *td.dag;

    const CplxVec tx = reference_tx(link, code, st.info);
    CplxVec rx;
    if (st.kind == SlotKind::Downlink) {
      st.tx_reference = tx;
    } else {
      rx = apply_channel(link, tx, rng);
    }
    for (auto e : dag.input_edges()) {
      const TaskSpec& dst = dag.task(dag.edges()[e].dst);
      Token tok;
      switch (dst.kernel.kind) {
        case KernelKind::PolarEncode: tok.payload = st.info.at(static_cast<std::size_t>(dst.kernel.param)); break;
        case KernelKind::BlindDetect: tok.payload = Scalar{static_cast<std::int64_t>(st.users)}; break;
        default: tok.payload = rx; break;
      }
      td.data.push_back(std::move(tok));
    }
    out.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------- experiment

double throughput(std::uint64_t info_bits, Cycles simulated_cycles, double clock_hz) {
  if (simulated_cycles == 0) throw std::invalid_argument("throughput: simulated_cycles must be > 0");
  return static_cast<double>(info_bits) * (clock_hz / static_cast<double>(simulated_cycles)) / 1e6;
}

ThroughputReport run_experiment(const ExperimentConfig& cfg) {
  cfg.link.validate();
  cfg.tdd.validate();
  cfg.machine.validate();
  if (cfg.slots == 0) throw std::invalid_argument("slots must be >= 1");

  const bool has_large = cfg.machine.l_tiles() > 0;
  const bool has_small = cfg.machine.s_tiles() > 0;
  const bool any_dl = std::count(cfg.tdd.slots.begin(), cfg.tdd.slots.end(), SlotKind::Downlink) > 0 &&
                      (cfg.slots > 1 || cfg.tdd.slots.front() == SlotKind::Downlink);
  const bool any_ul = std::count(cfg.tdd.slots.begin(), cfg.tdd.slots.end(), SlotKind::Uplink) > 0;

  DagPtr tx_dag, rx_dag;
  if (any_dl) tx_dag = std::make_shared<const Dag>(relax_attributes(build_tx_dag(cfg.link), has_large, has_small));
  if (any_ul) rx_dag = std::make_shared<const Dag>(relax_attributes(build_rx_dag(cfg.link), has_large, has_small));

  LinkExecutor executor(cfg.link, cfg.cost.bp_anchor_iters);
  auto spawned = spawn_threads(cfg.tdd, cfg.slots, cfg.link, executor.code(), tx_dag, rx_dag, cfg.seed);

  EventQueue events;
  events.set_trace(cfg.trace);
  Machine machine(cfg.machine, events);
  if (cfg.inject_violation) machine.inject_violation();

  Runtime::Options opts;
  opts.flags = cfg.flags;
  opts.cost = cfg.cost;
  opts.scratch_reserve_bytes = cfg.scratch_reserve_bytes;
  Runtime runtime(machine, executor, opts);

  std::map<ThreadId, ThreadResult> results;
  runtime.set_completion_callback([&](const ThreadResult& r) { results.emplace(r.thread, r); });
  for (auto& st : spawned) runtime.submit(st.thread);
  runtime.run();

  ThroughputReport rep;
  rep.clock_hz = cfg.machine.large.clock_hz;
  rep.threads = spawned.size();
  const bool verify_rx = std::isinf(cfg.link.snr_db) || cfg.link.snr_db >= cfg.verify_snr_db;
  for (const auto& st : spawned) {
    const auto it = results.find(st.thread.id);
    if (it == results.end()) continue;
    const ThreadResult& r = it->second;
    rep.simulated_cycles = std::max(rep.simulated_cycles, r.completed);
    const Token* sink = nullptr;
    for (const auto& [e, tok] : r.outputs) {
      if (e == kSinkOutput) sink = &tok;
    }
    if (st.kind == SlotKind::Downlink) {
      rep.tx_info_bits += st.users * cfg.link.K;
      ++rep.fidelity_checked;
      const auto* samples = sink ? std::get_if<CplxVec>(&sink->payload) : nullptr;
      if (!samples || *samples != st.tx_reference) ++rep.fidelity_failures;
    } else {
      rep.info_bits += st.users * cfg.link.K;
      BitVec truth;
      for (const auto& b : st.info) truth.insert(truth.end(), b.begin(), b.end());
      const auto* bits = sink ? std::get_if<BitVec>(&sink->payload) : nullptr;
      std::uint64_t errors = 0;
      if (!bits || bits->size() != truth.size()) {
        errors = truth.size() + 1;
      } else {
        for (std::size_t i = 0; i < truth.size(); ++i) errors += (*bits)[i] != truth[i];
      }
      rep.bit_errors += errors;
      if (verify_rx) {
        ++rep.fidelity_checked;
        if (errors) ++rep.fidelity_failures;
      }
    }
  }
  if (rep.simulated_cycles == 0) rep.simulated_cycles = std::max<Cycles>(1, events.now());
  rep.throughput_mbps = throughput(rep.info_bits, rep.simulated_cycles, rep.clock_hz);
  rep.tx_throughput_mbps = throughput(rep.tx_info_bits, rep.simulated_cycles, rep.clock_hz);

  double util_sum = 0.0;
  for (const auto& cl : machine.clusters()) {
    for (const auto& t : cl.tiles) {
      const double u = std::min(1.0, static_cast<double>(t.busy_cycles) / static_cast<double>(rep.simulated_cycles));
      rep.tile_utilization.push_back(u);
      util_sum += u;
    }
  }
  rep.mean_tile_utilization = rep.tile_utilization.empty() ? 0.0 : util_sum / static_cast<double>(rep.tile_utilization.size());
  rep.metrics = runtime.metrics();
  for (const auto& d : machine.dma_engines()) rep.dma_bytes += d.bytes;
  rep.bp_iterations = executor.bp_iterations();
  rep.digest = events.digest();
  rep.events = events.dispatched();
  rep.port_violations = machine.monitor().port_violations();
  rep.spm_overlaps = machine.monitor().spm_overlaps();
  rep.causality_violations = machine.monitor().causality_violations() + events.causality_violations();
  rep.peak_threads = runtime.peak_threads();
  rep.decisions = runtime.decisions();
  return rep;
}

}  // namespace wbpsim

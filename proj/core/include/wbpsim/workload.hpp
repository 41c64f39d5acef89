#pragma once

#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "wbpsim/dataflow.hpp"
#include "wbpsim/machine.hpp"
#include "wbpsim/polar.hpp"
#include "wbpsim/scheduler.hpp"
#include "wbpsim/signal.hpp"

namespace wbpsim {

/// Link parameters of the simplified PHY: polar coding, RV0 rate matching,
/// Gold scrambling, QPSK, 128-subcarrier OFDM, LS/ZF, min-sum BP.
struct LinkConfig {
  std::size_t N = 512;
  std::size_t K = 256;
  std::size_t E = 512;
  std::uint32_t c_init = 0x2f1;
  OfdmConfig ofdm{};
  unsigned bp_iters = 30;
  bool bp_early_exit = false;
  std::size_t users_per_slot = 5;
  /// Es/N0 per subcarrier; +inf disables the noise.
  double snr_db = kNoiselessSnr;
  double design_snr_db = 0.0;
  std::uint32_t pilot_seed = 0x5a5;
  /// Flat channel gain applied before the noise.
  Cplx gain{1.0, 0.0};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::size_t symbols_per_user() const { return E / 2 / ofdm.n_subcarriers; }
  /// Per-user scrambling seed.
  std::uint32_t user_c_init(std::size_t user) const {
    return static_cast<std::uint32_t>((c_init + user) & 0x7fffffffU);
  }
};

/// Frequency-domain pilot symbol shared by transmitter and receiver.
CplxVec pilot_symbol(const LinkConfig& cfg);

/// Code bytes assumed for each kernel's task binary.
std::size_t code_bytes_for(KernelKind k);

/// Per-user chains (encode, rate match, scramble, modulate, OFDM) merged
/// into one slot-assembly sink. Throws std::invalid_argument for 0 users.
Dag build_tx_dag(const LinkConfig& cfg);
/// OFDM demodulation, LS, ZF, soft demodulation, descrambling, rate
/// recovery and blind detection feeding a dismissible group of 20 BP
/// decoders and an aggregation sink.
Dag build_rx_dag(const LinkConfig& cfg);
/// Copy of `dag` where LARGE/SMALL attributes become ANY when the system has
/// no tile of that class.
Dag relax_attributes(const Dag& dag, bool has_large, bool has_small);

/// Functional task bodies for the TX and RX DAGs.
class LinkExecutor : public TaskExecutor {
 public:
  explicit LinkExecutor(const LinkConfig& cfg, unsigned bp_anchor_iters = 30);
  TaskOutcome execute(const Dag& dag, std::size_t task,
                      const std::vector<std::pair<std::size_t, Token>>& inputs) override;

  const PolarCode& code() const noexcept { return code_; }
  /// Total BP iterations executed so far.
  std::uint64_t bp_iterations() const noexcept { return bp_iterations_; }

 private:
  LinkConfig cfg_;
  PolarCode code_;
  CplxVec pilot_;
  unsigned bp_anchor_iters_;
  std::uint64_t bp_iterations_ = 0;
};

/// Reference transmitter: what the TX DAG computes for one slot.
CplxVec reference_tx(const LinkConfig& cfg, const PolarCode& code, const std::vector<BitVec>& info);
/// Reference receiver: decodes `users` users from slot samples.
std::vector<BitVec> reference_rx(const LinkConfig& cfg, const PolarCode& code, std::span<const Cplx> samples,
                                 std::size_t users);
/// Flat gain then AWGN at cfg.snr_db.
CplxVec apply_channel(const LinkConfig& cfg, std::span<const Cplx> tx, Rng& rng);

enum class SlotKind : std::uint8_t { Downlink, Uplink };

struct TddPattern {
  std::vector<SlotKind> slots{SlotKind::Downlink, SlotKind::Uplink};
  Cycles slot_cycles = 262000;

  void validate() const;
};

std::string format_pattern(const TddPattern& p);
/// "D,U,U" style list.
std::vector<SlotKind> parse_pattern(std::string_view s);

/// A spawned thread plus what it must deliver.
struct SpawnedThread {
  ThreadDescriptor thread;
  SlotKind kind = SlotKind::Downlink;
  std::size_t users = 0;
  std::vector<BitVec> info;  ///< ground truth info words
  CplxVec tx_reference;      ///< DL: expected slot samples
};

/// One thread per slot: TX DAG for downlink, RX DAG for uplink, arriving at
/// slot index * slot_cycles. Downlink data are fresh info bits; uplink data
/// are a reference transmission through the channel plus the slot's user
/// count. Deterministic in `seed`.
std::vector<SpawnedThread> spawn_threads(const TddPattern& pattern, std::size_t n_slots, const LinkConfig& link,
                                         const PolarCode& code, const DagPtr& tx_dag, const DagPtr& rx_dag,
                                         std::uint64_t seed);

struct ExperimentConfig {
  MachineConfig machine{};
  LinkConfig link{};
  TddPattern tdd{};
  std::size_t slots = 20;
  std::uint64_t seed = 1;
  SchedulerFlags flags{};
  CostParams cost = build_cost_params(default_anchors());
  std::size_t scratch_reserve_bytes = 16 * 1024;
  /// Decoded bits are checked against the truth at or above this SNR.
  double verify_snr_db = 10.0;
  std::ostream* trace = nullptr;
  bool inject_violation = false;
};

struct ThroughputReport {
  std::uint64_t info_bits = 0;     ///< delivered by completed RX threads
  std::uint64_t tx_info_bits = 0;  ///< carried by completed TX threads
  Cycles simulated_cycles = 0;
  double clock_hz = 500e6;
  double throughput_mbps = 0.0;
  double tx_throughput_mbps = 0.0;
  std::vector<double> tile_utilization;  ///< cluster-major
  double mean_tile_utilization = 0.0;
  SchedulerMetrics metrics{};
  std::uint64_t dma_bytes = 0;
  std::uint64_t digest = 0;
  std::uint64_t events = 0;
  std::size_t threads = 0;
  std::size_t fidelity_checked = 0;
  std::size_t fidelity_failures = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bp_iterations = 0;
  std::uint64_t port_violations = 0;
  std::uint64_t spm_overlaps = 0;
  std::uint64_t causality_violations = 0;
  std::vector<std::size_t> peak_threads;
  std::vector<DecisionRecord> decisions;
};

/// info_bits * clock_hz / simulated_cycles / 1e6. Throws
/// std::invalid_argument when simulated_cycles == 0.
double throughput(std::uint64_t info_bits, Cycles simulated_cycles, double clock_hz);
inline double throughput(const ThroughputReport& r) {
  return throughput(r.info_bits, r.simulated_cycles, r.clock_hz);
}

/// Wires every module, runs all threads to completion and checks fidelity.
ThroughputReport run_experiment(const ExperimentConfig& cfg);

}  // namespace wbpsim

#include "sidelink/radio.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sidelink {

Slot SimClock::slots_for_ms(double ms) const {
  return static_cast<Slot>(std::llround(ms / slot_duration_ms));
}

void SimClock::advance_to(Slot slot) {
  if (slot < current) throw SchedulingError("clock cannot move backwards");
  current = slot;
}

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Vec2 Motion::position_at(double time_ms) const {
  const double s = time_ms / 1000.0;
  return {origin.x + velocity_mps.x * s, origin.y + velocity_mps.y * s};
}

void ChannelModel::validate() const {
  if (path_loss_exponent < 2.0) throw std::invalid_argument("path loss exponent must be >= 2");
  if (shadowing_sigma_db < 0.0) throw std::invalid_argument("shadowing sigma must be >= 0");
  if (shadowing_decorrelation_m < 0.0) throw std::invalid_argument("decorrelation distance must be >= 0");
  if (capture_threshold_db < 0.0) throw std::invalid_argument("capture threshold must be >= 0");
}

double rsrp_at(double tx_power_dbm, double distance_m, const ChannelModel& model) {
  if (!(distance_m > 0.0)) throw std::invalid_argument("distance must be positive");
  return tx_power_dbm - model.reference_loss_db - 10.0 * model.path_loss_exponent * std::log10(distance_m);
}

std::string_view to_string(PhyChannel c) {
  switch (c) {
    case PhyChannel::Psbch: return "PSBCH";
    case PhyChannel::Pscch: return "PSCCH";
    case PhyChannel::Pssch: return "PSSCH";
    case PhyChannel::Psfch: return "PSFCH";
  }
  return "?";
}

std::size_t Transmission::payload_bits() const {
  struct Visitor {
    std::size_t operator()(const SsbPayload& p) const { return p.bits.size(); }
    std::size_t operator()(const SciPayload& p) const { return p.sci1a.size(); }
    std::size_t operator()(const DataPayload& p) const {
      return p.sci2a.size() + 2 * kL2IdBits + 8 * static_cast<std::size_t>(p.tb_bytes) +
             (p.pc5 ? p.pc5->size() : 0);
    }
    std::size_t operator()(const FeedbackPayload&) const { return 1; }
  };
  return std::visit(Visitor{}, payload);
}

void Transmission::validate() const {
  const bool ok = (channel == PhyChannel::Psbch && std::holds_alternative<SsbPayload>(payload)) ||
                  (channel == PhyChannel::Pscch && std::holds_alternative<SciPayload>(payload)) ||
                  (channel == PhyChannel::Pssch && std::holds_alternative<DataPayload>(payload)) ||
                  (channel == PhyChannel::Psfch && std::holds_alternative<FeedbackPayload>(payload));
  if (!ok) throw std::invalid_argument(std::string(to_string(channel)) + " cannot carry this payload kind");
  const bool shared = channel == PhyChannel::Pscch || channel == PhyChannel::Pssch;
  if (shared && !subchannels) throw std::invalid_argument("PSCCH/PSSCH transmissions need a subchannel range");
}

RadioMedium::RadioMedium(ChannelModel model, double slot_duration_ms, std::uint64_t seed)
    : model_(model), slot_duration_ms_(slot_duration_ms), seed_(seed) {
  model_.validate();
}

void RadioMedium::add_node(NodeId id, Motion motion) {
  if (!nodes_.emplace(id, motion).second) throw std::invalid_argument("duplicate node " + to_string(id));
  order_.insert(std::upper_bound(order_.begin(), order_.end(), id), id);
}

Vec2 RadioMedium::position(NodeId id, Slot slot) const {
  return nodes_.at(id).position_at(static_cast<double>(slot) * slot_duration_ms_);
}

double RadioMedium::mean_rsrp(NodeId from, NodeId to, double tx_power_dbm, Slot slot) const {
  const double d = std::max(distance(position(from, slot), position(to, slot)), 1e-3);
  return rsrp_at(tx_power_dbm, d, model_);
}

double RadioMedium::shadowing(NodeId a, NodeId b, Slot slot) {
  if (model_.shadowing_sigma_db == 0.0) return 0.0;
  const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto [it, inserted] = shadows_.try_emplace(key);
  auto& link = it->second;
  if (inserted) {
    std::seed_seq seq{seed_, std::uint64_t{key.first.value}, std::uint64_t{key.second.value}};
    link.rng.seed(seq);
  }
  std::normal_distribution<double> normal(0.0, model_.shadowing_sigma_db);
  const Vec2 pa = position(key.first, slot);
  const Vec2 pb = position(key.second, slot);
  if (!link.initialised) {
    link.value = normal(link.rng);
    link.initialised = true;
  } else if (model_.shadowing_decorrelation_m == 0.0) {
    link.value = normal(link.rng);
  } else {
    const double moved = distance(pa, link.pos_a) + distance(pb, link.pos_b);
    if (moved > 0.0) {
      const double rho = std::exp(-moved / model_.shadowing_decorrelation_m);
      link.value = rho * link.value + std::sqrt(1.0 - rho * rho) * normal(link.rng);
    }
  }
  link.pos_a = pa;
  link.pos_b = pb;
  return link.value;
}

std::vector<Reception> RadioMedium::deliver(const Transmission& t) {
  if (!has_node(t.sender)) throw std::invalid_argument("unknown sender " + to_string(t.sender));
  std::vector<Reception> out;
  for (NodeId rx : order_) {
    if (rx == t.sender) continue;
    const double rsrp = mean_rsrp(t.sender, rx, t.tx_power_dbm, t.slot) + shadowing(t.sender, rx, t.slot);
    if (rsrp > model_.noise_floor_dbm) out.push_back({rx, rsrp});
  }
  return out;
}

void RadioMedium::transmit(Transmission t) {
  t.validate();
  if (!has_node(t.sender)) throw std::invalid_argument("unknown sender " + to_string(t.sender));
  pending_.push_back(std::move(t));
}

namespace {

bool shares_grid(PhyChannel c) { return c == PhyChannel::Pscch || c == PhyChannel::Pssch; }

}  // namespace

RadioMedium::SlotOutcome RadioMedium::resolve(Slot slot) {
  SlotOutcome out;
  out.transmissions = std::move(pending_);
  pending_.clear();
  const auto& txs = out.transmissions;

  std::vector<std::vector<Reception>> heard(txs.size());
  for (std::size_t i = 0; i < txs.size(); ++i) {
    if (txs[i].slot != slot) throw SchedulingError("transmission buffered for the wrong slot");
    heard[i] = deliver(txs[i]);
  }

  auto rsrp_of = [&](std::size_t tx, NodeId rx) -> std::optional<double> {
    for (const auto& r : heard[tx]) {
      if (r.receiver == rx) return r.rsrp_dbm;
    }
    return std::nullopt;
  };

  std::set<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    for (std::size_t j = i + 1; j < txs.size(); ++j) {
      if (!shares_grid(txs[i].channel) || !shares_grid(txs[j].channel)) continue;
      if (txs[i].sender == txs[j].sender) continue;
      if (!txs[i].subchannels->overlaps(*txs[j].subchannels)) continue;
      pairs.insert(txs[i].sender < txs[j].sender ? std::make_pair(txs[i].sender, txs[j].sender)
                                                 : std::make_pair(txs[j].sender, txs[i].sender));
    }
  }
  out.collisions.assign(pairs.begin(), pairs.end());

  for (std::size_t i = 0; i < txs.size(); ++i) {
    for (const auto& r : heard[i]) {
      bool survives = true;
      if (shares_grid(txs[i].channel)) {
        for (std::size_t j = 0; j < txs.size() && survives; ++j) {
          if (j == i || !shares_grid(txs[j].channel) || txs[j].sender == txs[i].sender) continue;
          if (txs[j].sender == r.receiver) continue;
          if (!txs[i].subchannels->overlaps(*txs[j].subchannels)) continue;
          if (auto other = rsrp_of(j, r.receiver)) {
            if (r.rsrp_dbm - *other < model_.capture_threshold_db) survives = false;
          }
        }
      }
      if (survives) {
        out.deliveries.push_back({i, r});
      } else {
        ++out.destroyed;
      }
    }
  }
  return out;
}

void EventQueue::schedule(Slot slot, Action action, std::string label) {
  if (slot < current_) {
    throw SchedulingError("cannot schedule at slot " + std::to_string(slot) + " before current slot " +
                          std::to_string(current_));
  }
  heap_.push(Entry{slot, next_seq_++, std::move(label), std::move(action)});
}

std::size_t EventQueue::run_until(Slot slot) {
  if (slot < current_) throw SchedulingError("run_until cannot move backwards");
  std::size_t processed = 0;
  while (!heap_.empty() && heap_.top().slot <= slot) {
    Entry e = heap_.top();
    heap_.pop();
    current_ = e.slot;
    if (trace_enabled_) trace_.push_back(std::to_string(e.slot) + ":" + std::to_string(e.seq) + ":" + e.label);
    if (e.action) e.action();
    ++processed;
  }
  current_ = slot;
  return processed;
}

}  // namespace sidelink

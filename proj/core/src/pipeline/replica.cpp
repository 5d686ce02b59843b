// Copyright 2026 The pipebft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "pipebft/pipeline/replica.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <spdlog/spdlog.h>

#include "pipebft/common/byte_io.hpp"
#include "pipebft/pbft/engine.hpp"
#include "pipebft/pipeline/dispatch.hpp"
#include "pipebft/zyzzyva/engine.hpp"

namespace pipebft::pipeline {

namespace {

constexpr std::size_t kTagCount = 10;
constexpr std::chrono::milliseconds kIdlePoll{5};

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

std::size_t tag_index(messages::Tag t) { return static_cast<std::size_t>(t) - 1; }

}  // namespace

struct Replica::Counters {
  std::atomic<std::uint64_t> executed_batches{0};
  std::atomic<std::uint64_t> executed_txns{0};
  std::atomic<std::uint64_t> proposed_batches{0};
  std::atomic<std::uint64_t> bad_client_signatures{0};
  std::atomic<std::uint64_t> forwarded_requests{0};
  std::atomic<std::uint64_t> stable_checkpoints{0};
  std::atomic<std::uint64_t> bad_checkpoints{0};
  std::atomic<std::uint64_t> unroutable{0};
  std::atomic<std::uint64_t> duplicate_directives{0};
  std::array<std::atomic<std::uint64_t>, kTagCount> sent{};
  std::array<std::atomic<std::uint64_t>, kTagCount> received{};
};

Replica::Replica(ReplicaOptions options, transport::TransportConfig net,
                 const crypto::KeyStore& keys)
    : options_(std::move(options)),
      replicas_(options_.cluster.replicas()),
      auth_(std::make_unique<crypto::Authenticator>(options_.cluster.self, keys)),
      frames_(options_.pool_capacity, [](Bytes& b) { b.clear(); }),
      exec_queues_(std::max<std::size_t>(1, options_.queue_count), 0),
      checkpoint_tracker_(options_.cluster.n, options_.cluster.f, options_.checkpoint_interval),
      counters_(std::make_unique<Counters>()) {
  options_.cluster.validate();
  options_.topology.validate();
  options_.schemes.validate();
  if (options_.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (options_.checkpoint_interval == 0) {
    throw std::invalid_argument("checkpoint_interval must be positive");
  }
  if (!options_.cluster.is_replica(options_.cluster.self)) {
    throw std::invalid_argument("replica id outside the cluster");
  }
  for (NodeId r : replicas_) {
    if (r != options_.cluster.self) peers_.push_back(r);
  }

  net.self = options_.cluster.self;
  net.replica_input_threads = std::max(1, options_.topology.input_threads - 1);
  net.output_threads = std::max(1, options_.topology.output_threads);
  net.utilization = &utilization_;
  transport_ = std::make_unique<transport::Transport>(
      std::move(net), [this](transport::Inbound&& in) { on_inbound(std::move(in)); });

  if (options_.protocol == Protocol::kPbft) {
    pbft_ = std::make_unique<pbft::Engine>(options_.cluster, *auth_, options_.schemes);
  } else {
    zyzzyva_ = std::make_unique<zyzzyva::ReplicaEngine>(options_.cluster, *auth_, options_.schemes);
  }
  executor_ = std::make_unique<Executor>(
      options_.cluster.primary(0),
      ledger::make_state_store(options_.backend, options_.active_set, options_.state_file),
      options_.checkpoint_interval);
}

Replica::~Replica() { stop(); }

void Replica::start() {
  if (running_.exchange(true)) return;
  touch();
  transport_->start();
  const auto& topo = options_.topology;
  if (is_primary()) {
    for (int i = 0; i < topo.batch_threads; ++i) {
      ThreadStats& s = utilization_.register_thread("batch");
      threads_.emplace_back([this, &s] { batch_loop(s); });
    }
  }
  ThreadStats& w = utilization_.register_thread("worker");
  threads_.emplace_back([this, &w] { worker_loop(w); });
  if (topo.execute_threads > 0) {
    ThreadStats& e = utilization_.register_thread("execute");
    threads_.emplace_back([this, &e] { execute_loop(e); });
  }
  ThreadStats& c = utilization_.register_thread("checkpoint");
  threads_.emplace_back([this, &c] { checkpoint_loop(c); });
}

bool Replica::wait_for_mesh(std::chrono::milliseconds timeout) const {
  return transport_->wait_for_replicas(timeout).empty();
}

bool Replica::quiesce(std::chrono::milliseconds idle, std::chrono::milliseconds limit) {
  const auto deadline = SteadyClock::now() + limit;
  while (SteadyClock::now() < deadline) {
    const auto last = SteadyClock::time_point(SteadyClock::duration(last_activity_ns_.load()));
    if (SteadyClock::now() - last >= idle && work_.size() == 0 && requests_.size() == 0 &&
        !exec_queues_.ready()) {
      return true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return false;
}

void Replica::stop() {
  if (!running_.exchange(false)) return;
  requests_.close();
  work_.close();
  checkpoints_.close();
  exec_queues_.close();
  for (auto& t : threads_) t.join();
  threads_.clear();
  transport_->stop();
}

void Replica::on_inbound(transport::Inbound&& in) {
  const messages::Tag tag = messages::tag_of(in.msg);
  counters_->received[tag_index(tag)]++;
  Route route;
  try {
    route = route_for(tag, is_primary());
  } catch (const UnknownRoute&) {
    counters_->unroutable++;
    return;
  }
  switch (route) {
    case Route::kBatchQueue: {
      if (options_.topology.batch_threads == 0) {
        work_.push(std::move(in));
      } else {
        requests_.push_many(std::move(std::get<messages::ClientSubmit>(in.msg).requests));
      }
      break;
    }
    case Route::kForwardToPrimary: {
      counters_->forwarded_requests += std::get<messages::ClientSubmit>(in.msg).requests.size();
      send_to(options_.cluster.primary(0), in.msg);
      break;
    }
    case Route::kWorkQueue:
      work_.push(std::move(in));
      break;
    case Route::kCheckpointQueue:
      checkpoints_.push(std::get<messages::CheckpointMsg>(std::move(in.msg)));
      break;
    case Route::kExecutionQueue:
      counters_->unroutable++;
      break;
  }
}

bool Replica::fill_batch(Pending& pending, std::chrono::microseconds wait) {
  using std::chrono::microseconds;
  auto now = SteadyClock::now();
  if (!pending.requests.empty()) {
    const auto remaining =
        std::chrono::duration_cast<microseconds>(pending.first_arrival + options_.batch_timeout - now);
    if (remaining <= microseconds::zero()) return true;
    wait = std::min(wait, remaining);
  }
  const bool was_empty = pending.requests.empty();
  const std::size_t got =
      requests_.pop_many(pending.requests, options_.batch_size - pending.requests.size(), wait);
  now = SteadyClock::now();
  if (was_empty && got > 0) pending.first_arrival = now;
  if (pending.requests.size() >= options_.batch_size) return true;
  return !pending.requests.empty() && now - pending.first_arrival >= options_.batch_timeout;
}

void Replica::propose(std::vector<messages::ClientRequest> requests) {
  counters_->bad_client_signatures +=
      pbft::drop_unverified_requests(requests, *auth_, options_.schemes.client);
  if (requests.empty()) return;
  const SeqNum first = sequencer_.assign_range(requests.size());
  messages::RequestBatch batch{first, first + requests.size() - 1, std::move(requests)};
  messages::PrePrepare pp =
      pbft::make_preprepare(0, std::move(batch), *auth_, options_.schemes.replica, replicas_);
  broadcast(pp);
  counters_->proposed_batches++;
  work_.push(LocalProposal{std::move(pp)});
}

void Replica::batch_loop(ThreadStats& stats) {
  Pending pending;
  while (running_.load()) {
    if (!fill_batch(pending, kIdlePoll)) continue;
    BusyScope busy(stats);
    propose(std::exchange(pending.requests, {}));
  }
}

void Replica::worker_loop(ThreadStats& stats) {
  const bool inline_batching = is_primary() && options_.topology.batch_threads == 0;
  const bool inline_execution = options_.topology.execute_threads == 0;
  std::vector<WorkItem> items;
  while (running_.load()) {
    std::chrono::microseconds wait = kIdlePoll;
    if (inline_batching && !worker_pending_.requests.empty()) {
      const auto left = std::chrono::duration_cast<std::chrono::microseconds>(
          worker_pending_.first_arrival + options_.batch_timeout - SteadyClock::now());
      wait = std::clamp(left, std::chrono::microseconds::zero(), wait);
    }
    items.clear();
    work_.pop_many(items, 512, wait);
    const bool batch_due =
        inline_batching && !worker_pending_.requests.empty() &&
        (worker_pending_.requests.size() >= options_.batch_size ||
         SteadyClock::now() - worker_pending_.first_arrival >= options_.batch_timeout);
    if (items.empty() && !batch_due && !(inline_execution && exec_queues_.ready())) {
      continue;
    }
    BusyScope busy(stats);
    for (auto& item : items) handle_work(item);
    if (inline_batching) {
      while (worker_pending_.requests.size() >= options_.batch_size) {
        std::vector<messages::ClientRequest> head(
            std::make_move_iterator(worker_pending_.requests.begin()),
            std::make_move_iterator(worker_pending_.requests.begin() +
                                    static_cast<std::ptrdiff_t>(options_.batch_size)));
        worker_pending_.requests.erase(
            worker_pending_.requests.begin(),
            worker_pending_.requests.begin() + static_cast<std::ptrdiff_t>(options_.batch_size));
        propose(std::move(head));
        worker_pending_.first_arrival = SteadyClock::now();
      }
      if (!worker_pending_.requests.empty() &&
          SteadyClock::now() - worker_pending_.first_arrival >= options_.batch_timeout) {
        propose(std::exchange(worker_pending_.requests, {}));
      }
    }
    if (inline_execution) execute_ready();
  }
}

void Replica::on_preprepare(const messages::PrePrepare& pp, bool local) {
  if (pbft_) {
    // Votes buffered before the PrePrepare can complete phases right away.
    auto fx = pbft_->on_preprepare(pp, local);
    if (fx.prepare) broadcast(*fx.prepare);
    if (fx.commit) broadcast(*fx.commit);
    if (fx.directive) schedule(std::move(*fx.directive));
  } else {
    auto fx = zyzzyva_->on_preprepare(pp, local);
    if (fx.directive) schedule(std::move(*fx.directive));
  }
}

void Replica::handle_work(WorkItem& item) {
  touch();
  std::visit(
      Overloaded{
          [this](transport::Inbound& in) {
            std::visit(
                Overloaded{
                    [this](messages::PrePrepare& pp) { on_preprepare(pp, false); },
                    [this](messages::Prepare& p) {
                      if (!pbft_) return void(counters_->unroutable++);
                      auto fx = pbft_->on_prepare(p);
                      if (fx.prepare) broadcast(*fx.prepare);
                      if (fx.commit) broadcast(*fx.commit);
                      if (fx.directive) schedule(std::move(*fx.directive));
                    },
                    [this](messages::Commit& c) {
                      if (!pbft_) return void(counters_->unroutable++);
                      auto fx = pbft_->on_commit(c);
                      if (fx.prepare) broadcast(*fx.prepare);
                      if (fx.commit) broadcast(*fx.commit);
                      if (fx.directive) schedule(std::move(*fx.directive));
                    },
                    [this](messages::CommitCertificate& cert) {
                      if (!zyzzyva_) return void(counters_->unroutable++);
                      auto res = zyzzyva_->on_commit_certificate(cert);
                      if (res.ack) send_to(cert.client_id, *res.ack);
                    },
                    [this](messages::ClientSubmit& s) {
                      if (worker_pending_.requests.empty()) {
                        worker_pending_.first_arrival = SteadyClock::now();
                      }
                      for (auto& r : s.requests) worker_pending_.requests.push_back(std::move(r));
                    },
                    [this](auto&) { counters_->unroutable++; },
                },
                in.msg);
          },
          [this](LocalProposal& lp) { on_preprepare(lp.pp, true); },
          [this](StableNotice& s) {
            if (pbft_) {
              pbft_->on_stable_checkpoint(s.txn_seq);
            } else {
              zyzzyva_->on_stable_checkpoint(s.txn_seq);
            }
          },
      },
      item);
}

void Replica::schedule(ExecuteDirective directive) {
  try {
    exec_queues_.push(std::move(directive));
  } catch (const DuplicateDirective& e) {
    counters_->duplicate_directives++;
    spdlog::warn("replica {}: {}", id(), e.what());
  }
}

void Replica::execute_ready() {
  while (auto d = exec_queues_.try_pop_next()) execute_one(*d);
}

void Replica::execute_loop(ThreadStats& stats) {
  while (running_.load()) {
    auto d = exec_queues_.pop_next(kIdlePoll);
    if (!d) continue;
    BusyScope busy(stats);
    execute_one(*d);
    execute_ready();
  }
}

void Replica::execute_one(const ExecuteDirective& d) {
  touch();
  ExecutionResult res = executor_->execute(d);
  const auto& requests = d.batch->requests;
  counters_->executed_batches++;
  counters_->executed_txns += requests.size();
  if (options_.keep_audit) {
    AuditBatch a;
    a.batch.first_seq = d.first_seq;
    a.batch.last_seq = d.last_seq;
    a.batch.requests.reserve(requests.size());
    for (const auto& r : requests) {
      a.batch.requests.push_back({r.client_id, r.request_seq, r.operations, {}, {}});
    }
    audit_.push_back(std::move(a));
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    if (pbft_) {
      messages::ClientResponse resp{r.client_id, r.request_seq, std::move(res.results[i]), id(), {}};
      resp.sig = auth_->sign(r.client_id, messages::signing_bytes(resp), options_.schemes.replica);
      send_to(r.client_id, resp);
    } else {
      send_to(r.client_id,
              zyzzyva::make_spec_response(d, i, res.results[i], *auth_,
                                          options_.schemes.speculative_response()));
    }
  }
  if (res.checkpoint_due) {
    const auto& chain = executor_->chain();
    messages::CheckpointMsg m{chain.height(), chain.next_seq(), chain.head_hash(), id(), {}};
    m.sig = auth_->sign(replicas_, messages::signing_bytes(m), options_.schemes.replica);
    broadcast(m);
    checkpoints_.push(std::move(m));
  }
}

void Replica::checkpoint_loop(ThreadStats& stats) {
  while (running_.load()) {
    auto m = checkpoints_.pop(kIdlePoll);
    if (!m) continue;
    BusyScope busy(stats);
    if (m->sender_id != id()) {
      bool ok = false;
      try {
        ok = options_.cluster.is_replica(m->sender_id) &&
             auth_->verify(m->sender_id, messages::signing_bytes(*m), m->sig,
                           options_.schemes.replica);
      } catch (const crypto::MissingKey&) {
        ok = false;
      }
      if (!ok) {
        counters_->bad_checkpoints++;
        continue;
      }
    }
    if (auto stable = checkpoint_tracker_.on_checkpoint(*m)) {
      counters_->stable_checkpoints++;
      work_.push(StableNotice{stable->txn_seq});
    }
  }
}

transport::Frame Replica::frame_of(const messages::Message& m) {
  std::shared_ptr<Bytes> buf = frames_.acquire_shared();
  messages::encode_message_into(m, *buf);
  return buf;
}

void Replica::broadcast(const messages::Message& m) {
  const auto sent = transport_->broadcast(replicas_, frame_of(m));
  counters_->sent[tag_index(messages::tag_of(m))] += sent;
}

void Replica::send_to(NodeId to, const messages::Message& m) {
  if (transport_->send(to, frame_of(m))) counters_->sent[tag_index(messages::tag_of(m))]++;
}

ReplicaMetrics Replica::metrics() const {
  ReplicaMetrics out;
  out.executed_batches = counters_->executed_batches.load();
  out.executed_txns = counters_->executed_txns.load();
  out.proposed_batches = counters_->proposed_batches.load();
  out.bad_client_signatures = counters_->bad_client_signatures.load();
  out.forwarded_requests = counters_->forwarded_requests.load();
  out.stable_checkpoints = counters_->stable_checkpoints.load();
  out.unroutable = counters_->unroutable.load();
  out.window_overflows = exec_queues_.window_overflows();
  for (std::size_t i = 0; i < kTagCount; ++i) {
    const auto name = std::string(messages::tag_name(static_cast<messages::Tag>(i + 1)));
    if (auto v = counters_->sent[i].load()) out.sent[name] = v;
    if (auto v = counters_->received[i].load()) out.received[name] = v;
  }
  out.engine["bad_checkpoints"] = counters_->bad_checkpoints.load();
  out.engine["duplicate_directives"] = counters_->duplicate_directives.load();
  if (pbft_) {
    const auto& c = pbft_->counters();
    out.engine["preprepares"] = c.preprepares;
    out.engine["prepares"] = c.prepares;
    out.engine["commits"] = c.commits;
    out.engine["committed"] = c.committed;
    out.engine["buffered"] = c.buffered;
    out.engine["duplicates"] = c.duplicates;
    out.engine["bad_signatures"] = c.bad_signatures;
    out.engine["digest_mismatches"] = c.digest_mismatches;
    out.engine["equivocations"] = c.equivocations;
    out.engine["window_drops"] = c.window_drops;
    out.engine["stale"] = c.stale;
    out.engine["live_instances"] = pbft_->live_instances();
  } else {
    const auto& c = zyzzyva_->counters();
    out.engine["preprepares"] = c.preprepares;
    out.engine["executed_batches"] = c.executed_batches;
    out.engine["certificates"] = c.certificates;
    out.engine["invalid_certificates"] = c.invalid_certificates;
    out.engine["unknown_sequence"] = c.unknown_sequence;
    out.engine["equivocations"] = c.equivocations;
    out.engine["bad_signatures"] = c.bad_signatures;
    out.engine["live_batches"] = zyzzyva_->live_batches();
  }
  out.pool = frames_.stats();
  out.transport = transport_->counters();
  return out;
}

void write_audit(const std::vector<AuditBatch>& audit, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& a : audit) {
    const Bytes body = messages::encode_batch(a.batch);
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(body.size()));
    const Bytes len = w.take();
    out.write(reinterpret_cast<const char*>(len.data()), static_cast<std::streamsize>(len.size()));
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  }
}

std::vector<messages::RequestBatch> read_audit(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<messages::RequestBatch> out;
  ByteReader r(as_view(data));
  while (!r.done()) {
    const std::uint32_t len = r.u32();
    out.push_back(messages::decode_batch(r.view(len)));
  }
  return out;
}

void Replica::write_outputs(const std::filesystem::path& dir,
                            const std::vector<double>& utilization_fractions) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "chain.dump");
    ledger::write_chain_dump(chain(), out);
  }
  {
    std::ofstream out(dir / "state.csv");
    out << "key,value\n";
    for (const auto& [k, v] : state().modified_records()) out << k << ',' << v << '\n';
  }
  write_audit(audit_, dir / "audit.bin");
  const ReplicaMetrics m = metrics();
  std::ofstream out(dir / "metrics.csv");
  out << "metric,value\n";
  out << "executed_batches," << m.executed_batches << '\n';
  out << "executed_txns," << m.executed_txns << '\n';
  out << "proposed_batches," << m.proposed_batches << '\n';
  out << "bad_client_signatures," << m.bad_client_signatures << '\n';
  out << "forwarded_requests," << m.forwarded_requests << '\n';
  out << "stable_checkpoints," << m.stable_checkpoints << '\n';
  out << "unroutable," << m.unroutable << '\n';
  out << "window_overflows," << m.window_overflows << '\n';
  out << "chain_height," << chain().height() << '\n';
  for (const auto& [k, v] : m.sent) out << "sent." << k << ',' << v << '\n';
  for (const auto& [k, v] : m.received) out << "received." << k << ',' << v << '\n';
  for (const auto& [k, v] : m.engine) out << "engine." << k << ',' << v << '\n';
  out << "pool.acquired," << m.pool.acquired << '\n';
  out << "pool.fresh_allocations," << m.pool.fresh_allocations << '\n';
  out << "pool.high_water," << m.pool.high_water << '\n';
  out << "transport.frames_sent," << m.transport.frames_sent << '\n';
  out << "transport.frames_received," << m.transport.frames_received << '\n';
  out << "transport.bytes_sent," << m.transport.bytes_sent << '\n';
  out << "transport.bytes_received," << m.transport.bytes_received << '\n';
  out << "transport.peer_down," << m.transport.peer_down << '\n';
  out << "transport.malformed," << m.transport.malformed << '\n';
  for (std::size_t i = 0; i < utilization_fractions.size(); ++i) {
    out << "utilization." << i << ',' << utilization_fractions[i] << '\n';
  }
}

}  // namespace pipebft::pipeline

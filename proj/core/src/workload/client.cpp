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


#include "pipebft/workload/client.hpp"

#include <optional>
#include <queue>
#include <unordered_map>

#include "pipebft/zyzzyva/engine.hpp"

namespace pipebft::workload {

namespace {

struct Outstanding {
  std::uint32_t logical = 0;
  std::int64_t submit_ns = 0;
  std::int64_t deadline_ns = 0;
  std::uint32_t ops = 0;
  std::optional<ReplyCollector> reply;
  std::optional<zyzzyva::SpecCollector> spec;
};

using Timer = std::pair<std::int64_t, std::uint64_t>;  // deadline, request_seq

}  // namespace

ClientEndpoint::ClientEndpoint(ClientOptions options, transport::TransportConfig net,
                               const crypto::KeyStore& keys)
    : options_(std::move(options)), self_(net.self) {
  options_.cluster.validate();
  options_.schemes.validate();
  options_.workload.validate();
  if (options_.cluster.is_replica(self_)) {
    throw std::invalid_argument("client endpoint id collides with a replica id");
  }
  auth_ = std::make_unique<crypto::Authenticator>(self_, keys);
  generator_ = std::make_unique<RequestGenerator>(options_.workload, self_);
  transport_ = std::make_unique<transport::Transport>(
      std::move(net), [this](transport::Inbound&& in) { inbound_.push(std::move(in)); });
}

ClientEndpoint::~ClientEndpoint() { stop(); }

void ClientEndpoint::start() { transport_->start(); }

void ClientEndpoint::stop() {
  inbound_.close();
  transport_->stop();
}

std::vector<NodeId> ClientEndpoint::wait_for_replicas(std::chrono::milliseconds timeout) const {
  return transport_->wait_for_replicas(timeout);
}

RunResult ClientEndpoint::run(RunLimits limits) {
  RunResult out;
  auto& ctr = out.counters;
  const auto& wl = options_.workload;
  const bool pbft = options_.protocol == Protocol::kPbft;
  const NodeId primary = options_.cluster.primary(0);
  const auto replicas = options_.cluster.replicas();
  const std::int64_t timeout_ns =
      std::chrono::nanoseconds(pbft ? options_.request_timeout : options_.spec_timeout).count();

  // Drop anything left over from an earlier run.
  std::vector<transport::Inbound> inbox;
  while (inbound_.pop_many(inbox, 1024, std::chrono::microseconds(0)) > 0) inbox.clear();

  const std::int64_t t0 = monotonic_ns();
  const std::int64_t end = t0 + limits.duration.count();
  auto now = [t0] { return monotonic_ns() - t0; };

  std::unordered_map<std::uint64_t, Outstanding> live;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers;
  std::vector<messages::ClientRequest> unsent;

  auto flush = [&] {
    if (unsent.empty()) return;
    transport_->send(primary, transport::make_frame(messages::ClientSubmit{std::move(unsent)}));
    unsent.clear();
    ctr.frames++;
  };
  auto issue = [&](std::uint32_t logical) {
    messages::ClientRequest r = generator_->next();
    RequestGenerator::sign(r, *auth_, options_.schemes.client, primary);
    Outstanding o;
    o.logical = logical;
    o.submit_ns = now();
    o.deadline_ns = o.submit_ns + timeout_ns;
    o.ops = static_cast<std::uint32_t>(r.operations.size());
    if (pbft) {
      o.reply.emplace(options_.cluster.f, self_, r.request_seq);
    } else {
      o.spec.emplace(options_.cluster.n, options_.cluster.f, self_, r.request_seq);
    }
    timers.emplace(o.deadline_ns, r.request_seq);
    live.emplace(r.request_seq, std::move(o));
    unsent.push_back(std::move(r));
    ctr.submitted++;
    if (unsent.size() >= wl.client_batch) flush();
  };
  auto finish = [&](std::uint64_t seq, RequestOutcome outcome, std::int64_t complete_ns) {
    auto it = live.find(seq);
    const Outstanding& o = it->second;
    if (o.spec && o.spec->mismatched()) ctr.spec_mismatches++;
    out.records.push_back({o.logical, seq, o.submit_ns, complete_ns, outcome, o.ops});
    const std::uint32_t logical = o.logical;
    live.erase(it);
    switch (outcome) {
      case RequestOutcome::kTimeout:
        ctr.timeouts++;
        ctr.resubmits++;
        break;
      case RequestOutcome::kFailed:
        ctr.failed++;
        ctr.resubmits++;
        break;
      default:
        ctr.completed++;
        break;
    }
    issue(logical);
  };
  auto verified = [&](NodeId from, NodeId signer, const Bytes& bytes,
                      const crypto::Signature& sig, crypto::Scheme scheme) {
    if (from != signer || !options_.cluster.is_replica(signer)) return false;
    try {
      return auth_->verify(signer, as_view(bytes), sig, scheme);
    } catch (const crypto::MissingKey&) {
      return false;
    }
  };

  for (std::uint32_t c = 0; c < wl.num_clients; ++c) {
    for (std::uint32_t j = 0; j < wl.num_req; ++j) issue(c);
  }
  flush();

  auto done = [&] {
    return out.safety_violation ||
           (limits.max_completions > 0 && ctr.completed >= limits.max_completions);
  };
  while (monotonic_ns() < end && !done()) {
    std::int64_t wait_ns = std::min<std::int64_t>(end - monotonic_ns(), 5'000'000);
    if (!timers.empty()) wait_ns = std::min(wait_ns, timers.top().first - now());
    inbox.clear();
    inbound_.pop_many(inbox, 1024,
                      std::chrono::microseconds(std::max<std::int64_t>(0, wait_ns / 1000)));

    for (auto& in : inbox) {
      if (done()) break;
      if (auto* resp = std::get_if<messages::ClientResponse>(&in.msg)) {
        auto it = live.find(resp->request_seq);
        if (!pbft || it == live.end() || resp->client_id != self_) {
          ctr.stale_responses++;
          continue;
        }
        if (!verified(in.from, resp->replica_id, messages::signing_bytes(*resp), resp->sig,
                      options_.schemes.replica)) {
          ctr.bad_response_signatures++;
          continue;
        }
        const ReplyStatus st = it->second.reply->add(*resp);
        if (st == ReplyStatus::kComplete) {
          finish(resp->request_seq, RequestOutcome::kCommitted, now());
        } else if (st == ReplyStatus::kMismatch) {
          out.safety_violation = true;
          out.violation = "replicas returned different results for request " +
                          std::to_string(resp->request_seq);
        }
      } else if (auto* spec = std::get_if<messages::SpecResponse>(&in.msg)) {
        auto it = live.find(spec->request_seq);
        if (pbft || it == live.end() || spec->client_id != self_) {
          ctr.stale_responses++;
          continue;
        }
        if (!verified(in.from, spec->replica_id, messages::signing_bytes(*spec), spec->sig,
                      options_.schemes.speculative_response())) {
          ctr.bad_response_signatures++;
          continue;
        }
        if (it->second.spec->add_response(*spec) == zyzzyva::Outcome::kFastComplete) {
          finish(spec->request_seq, RequestOutcome::kFast, now());
        }
      } else if (auto* ack = std::get_if<messages::CertAck>(&in.msg)) {
        auto it = live.find(ack->request_seq);
        if (pbft || it == live.end() || ack->client_id != self_) {
          ctr.stale_responses++;
          continue;
        }
        if (!verified(in.from, ack->replica_id, messages::signing_bytes(*ack), ack->sig,
                      options_.schemes.replica)) {
          ctr.bad_response_signatures++;
          continue;
        }
        if (it->second.spec->add_ack(*ack) == zyzzyva::Outcome::kCertCommitted) {
          finish(ack->request_seq, RequestOutcome::kCertified, now());
        }
      } else {
        ctr.stale_responses++;
      }
    }

    const std::int64_t t = now();
    while (!timers.empty() && timers.top().first <= t && !done()) {
      const auto [deadline, seq] = timers.top();
      timers.pop();
      auto it = live.find(seq);
      if (it == live.end() || it->second.deadline_ns != deadline) continue;
      Outstanding& o = it->second;
      if (pbft) {
        finish(seq, RequestOutcome::kTimeout, o.submit_ns + timeout_ns);
        continue;
      }
      auto action = o.spec->on_timeout();
      if (action.certificate) {
        ctr.certificates++;
        transport_->broadcast(replicas, transport::make_frame(*action.certificate));
        o.deadline_ns = t + timeout_ns;
        timers.emplace(o.deadline_ns, seq);
      } else if (action.outcome == zyzzyva::Outcome::kFailed) {
        finish(seq, RequestOutcome::kFailed, t);
      }
    }
    flush();
  }
  return out;
}

}  // namespace pipebft::workload

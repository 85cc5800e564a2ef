#pragma once

// End-to-end simulation of the one-round protocol: clients build uploads in
// parallel, ship them over a transport, and the server aggregates.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <future>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fedishc/datagen.hpp"
#include "fedishc/federation.hpp"
#include "fedishc/transport.hpp"
#include "fedishc/wire.hpp"

namespace fedishc {

enum class TransportKind { in_process, socket };

inline TransportKind parse_transport(std::string_view s) {
  if (s == "in-process" || s == "bus") return TransportKind::in_process;
  if (s == "socket") return TransportKind::socket;
  throw InvalidArgument("unknown transport '" + std::string(s) + "'");
}

struct ProtocolOptions {
  std::size_t replicates = 30;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
  TransportKind transport = TransportKind::in_process;
};

// Bootstrap seed for one client, independent of client ordering.
inline std::uint64_t client_seed(std::uint64_t seed, std::string_view client_id) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : client_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;  // splitmix64 finaliser
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (std::size_t t = 0; t < threads; ++t)
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    }));
  for (auto& j : jobs) j.get();
}

}  // namespace detail

inline std::vector<ClientUpload> compute_uploads(const std::vector<ClientDataset>& clients, const ProtocolOptions& opt) {
  std::vector<ClientUpload> out(clients.size());
  detail::parallel_for(clients.size(), opt.threads, [&](std::size_t k) {
    out[k] = make_upload(clients[k], opt.replicates, client_seed(opt.seed, clients[k].client_id));
  });
  return out;
}

struct ProtocolResult {
  std::vector<ClientUpload> uploads;  // as received by the server
  std::vector<std::uint64_t> encoded_bytes;
  VariableRegistry registry;
  GlobalCumulantTable global;
};

inline ProtocolResult run_protocol(const std::vector<ClientDataset>& clients, const ProtocolOptions& opt) {
  if (clients.empty()) throw InvalidArgument("run_protocol: no clients");
  std::vector<Bytes> messages(clients.size());
  detail::parallel_for(clients.size(), opt.threads, [&](std::size_t k) {
    messages[k] = encode_upload(make_upload(clients[k], opt.replicates, client_seed(opt.seed, clients[k].client_id)));
  });

  AggregationServer server;
  if (opt.transport == TransportKind::in_process) {
    InProcessBus bus;
    for (const auto& m : messages) bus.send(m);
    bus.close();
    server.drain(bus);
  } else {
    for (const auto& m : messages) {
      auto [client_end, server_end] = make_socket_pair();
      std::thread sender([&, ep = client_end.get()] {
        ep->send(m);
        ep->close();
      });
      server.drain(*server_end);
      sender.join();
    }
  }

  ProtocolResult r;
  r.uploads = server.uploads();
  for (const auto& m : messages) r.encoded_bytes.push_back(m.size());
  r.registry = server.registry();
  r.global = server.aggregate();
  return r;
}

}  // namespace fedishc

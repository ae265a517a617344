#pragma once

// Socket backend. One TCP connection per node pair, frames in both
// directions, demultiplexed by a reader thread per connection: replies are
// matched to outstanding calls by rid, requests are dispatched to the
// node, pushes land in the node's mailboxes. TCP preserves order per
// connection and the mailboxes key by (slot, round), so nothing depends on
// cross-connection timing. TCP_NODELAY is set everywhere: the protocols
// ping-pong small frames, and Nagle batching would stall them.
//
// Right after connecting, the dialer sends a hello frame (ACK carrying
// "hello" and its role) so the acceptor knows which peer arrived.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "psh/party.hpp"
#include "psh/transport.hpp"
#include "psh/wire.hpp"

namespace psh {

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

constexpr std::uint64_t kMaxFrameBody = 1ull << 31;

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

inline void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

inline void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w <= 0) throw NetError("connection write failed");
    p += w;
    n -= std::size_t(w);
  }
}

// False on clean EOF at a frame boundary, throws mid-frame.
inline bool read_exact(int fd, std::uint8_t* p, std::size_t n,
                       bool eof_ok = false) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r == 0) {
      if (got == 0 && eof_ok) return false;
      throw NetError("connection closed mid-frame");
    }
    if (r < 0) throw NetError("connection read failed");
    got += std::size_t(r);
  }
  return true;
}

inline void send_frame_fd(int fd, const Frame& f, std::mutex& write_mu) {
  const auto bytes = f.encode();
  std::lock_guard lk(write_mu);
  write_all(fd, bytes.data(), bytes.size());
}

inline bool recv_frame_fd(int fd, Frame& out) {
  std::uint8_t hdr[13];
  if (!read_exact(fd, hdr, sizeof hdr, /*eof_ok=*/true)) return false;
  if (std::memcmp(hdr, "PSH1", 4) != 0) throw WireError("bad frame magic");
  const std::uint8_t type = hdr[4];
  if (type < 1 || type > 11) throw WireError("unknown message type");
  std::uint64_t blen = 0;
  for (int i = 0; i < 8; ++i) blen |= std::uint64_t(hdr[5 + i]) << (8 * i);
  if (blen > kMaxFrameBody) throw WireError("oversized frame body");
  std::vector<std::uint8_t> body(static_cast<std::size_t>(blen), 0);
  if (blen) read_exact(fd, body.data(), body.size());
  out = Frame::decode_body(MsgType(type), body.data(), body.size());
  return true;
}

}  // namespace detail

// Dial with retry so processes may start in any order.
inline int tcp_connect(const std::string& host, std::uint16_t port,
                       std::chrono::milliseconds give_up =
                           std::chrono::seconds(15)) {
  const auto deadline = std::chrono::steady_clock::now() + give_up;
  std::string last_err = "no address";
  for (;;) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_s = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_s.c_str(), &hints, &res) == 0) {
      for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
          ::freeaddrinfo(res);
          detail::set_nodelay(fd);
          return fd;
        }
        last_err = std::strerror(errno);
        detail::close_fd(fd);
      }
      ::freeaddrinfo(res);
    } else {
      last_err = "getaddrinfo failed for " + host;
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw NetError("cannot connect to " + host + ":" + port_s + " (" +
                     last_err + ")");
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

class TcpListener {
 public:
  TcpListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw NetError("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0")
      addr.sin_addr.s_addr = INADDR_ANY;
    else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw NetError("listen host must be an IPv4 address: " + host);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw NetError("bind " + host + ":" + std::to_string(port) + " failed: " +
                     std::strerror(errno));
    if (::listen(fd_, 16) != 0) throw NetError("listen failed");
  }

  ~TcpListener() { close(); }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  // -1 once the listener is closed.
  int accept() {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) detail::set_nodelay(fd);
    return fd;
  }

  void close() {
    const int fd = fd_.exchange(-1);
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

 private:
  std::atomic<int> fd_{-1};
};

// A live connection to one peer. call() writes a request and blocks for
// the rid-matched reply; incoming requests and pushes are handed to the
// owner's sink from the reader thread.
class TcpLink final : public Link {
 public:
  TcpLink(int fd, std::shared_ptr<FrameSink> sink)
      : fd_(fd), sink_(std::move(sink)) {
    reader_ = std::thread([this] { reader_loop(); });
  }

  ~TcpLink() override {
    shutdown();
    if (reader_.joinable()) reader_.join();
  }

  TcpLink(const TcpLink&) = delete;
  TcpLink& operator=(const TcpLink&) = delete;

  Frame call(Frame request, std::chrono::milliseconds timeout) override {
    const std::uint64_t rid = next_rid_.fetch_add(1, std::memory_order_relaxed);
    request.put_u64("rid", rid);
    auto waiter = std::make_shared<std::promise<Frame>>();
    auto fut = waiter->get_future();
    {
      std::lock_guard lk(pending_mu_);
      if (dead_) throw NetError("link is down");
      pending_[rid] = waiter;
    }
    try {
      detail::send_frame_fd(fd_, request, write_mu_);
    } catch (...) {
      std::lock_guard lk(pending_mu_);
      pending_.erase(rid);
      throw;
    }
    if (fut.wait_for(timeout) != std::future_status::ready) {
      std::lock_guard lk(pending_mu_);
      pending_.erase(rid);
      throw TimeoutError("rpc timeout after " +
                         std::to_string(timeout.count()) + " ms");
    }
    return fut.get();
  }

  void push(Frame oneway) override {
    detail::send_frame_fd(fd_, oneway, write_mu_);
  }

  void shutdown() {
    if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  void reader_loop() {
    try {
      Frame f;
      while (detail::recv_frame_fd(fd_, f)) {
        const bool is_reply =
            (f.type == MsgType::Ack || f.type == MsgType::Nack) && f.has("rid");
        if (is_reply) {
          std::shared_ptr<std::promise<Frame>> waiter;
          {
            std::lock_guard lk(pending_mu_);
            auto it = pending_.find(f.u64("rid"));
            if (it != pending_.end()) {
              waiter = it->second;
              pending_.erase(it);
            }
          }
          if (waiter) waiter->set_value(std::move(f));
          // unmatched replies (timed-out calls) are dropped
        } else if (f.has("rid")) {
          Frame reply = sink_->on_request(std::move(f));
          detail::send_frame_fd(fd_, reply, write_mu_);
        } else {
          sink_->on_push(std::move(f));
        }
        f = Frame();
      }
    } catch (const std::exception&) {
      // fall through to teardown
    }
    std::lock_guard lk(pending_mu_);
    dead_ = true;
    for (auto& [rid, waiter] : pending_)
      waiter->set_exception(
          std::make_exception_ptr(NetError("link closed while waiting")));
    pending_.clear();
    detail::close_fd(fd_.exchange(-1));
  }

  std::atomic<int> fd_;
  std::shared_ptr<FrameSink> sink_;
  std::mutex write_mu_;
  std::mutex pending_mu_;
  std::map<std::uint64_t, std::shared_ptr<std::promise<Frame>>> pending_;
  bool dead_ = false;
  std::atomic<std::uint64_t> next_rid_{1};
  std::atomic<bool> shut_{false};
  std::thread reader_;
};

inline void send_hello(int fd, NodeRole self, std::mutex& mu) {
  Frame hello(MsgType::Ack);
  hello.put_u64("hello", 1);
  hello.put_str("role", node_role_name(self));
  detail::send_frame_fd(fd, hello, mu);
}

inline NodeRole recv_hello(int fd) {
  Frame f;
  if (!detail::recv_frame_fd(fd, f) || f.type != MsgType::Ack ||
      !f.has("hello"))
    throw NetError("peer did not introduce itself");
  return node_role_from_name(f.str("role"));
}

// Dial a peer, introduce ourselves, wrap the socket.
inline std::unique_ptr<TcpLink> dial_link(NodeRole self, const Endpoint& to,
                                          std::shared_ptr<FrameSink> sink) {
  const int fd = tcp_connect(to.host, to.port);
  std::mutex mu;
  send_hello(fd, self, mu);
  return std::make_unique<TcpLink>(fd, std::move(sink));
}

// Runs one node over sockets: listens on its topology address, dials the
// peers it must reach, accepts everyone else.
class TcpNodeHost {
 public:
  TcpNodeHost(PartyNode& node, Topology topo)
      : node_(node), topo_(std::move(topo)) {}

  ~TcpNodeHost() { stop(); }

  void start() {
    const Endpoint& self = topo_.at(node_.role());
    listener_ = std::make_unique<TcpListener>(self.host, self.port);
    for (NodeRole peer : dial_targets(node_.role(), topo_)) {
      auto link = dial_link(node_.role(), topo_.at(peer), node_.sink());
      node_.connect(peer, *link);
      links_.push_back(std::move(link));
    }
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (listener_) listener_->close();
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& l : links_) l->shutdown();
    links_.clear();
  }

 private:
  void accept_loop() {
    for (;;) {
      const int fd = listener_->accept();
      if (fd < 0) return;
      try {
        const NodeRole peer = recv_hello(fd);
        auto link = std::make_unique<TcpLink>(fd, node_.sink());
        node_.connect(peer, *link);
        std::lock_guard lk(links_mu_);
        links_.push_back(std::move(link));
      } catch (const std::exception&) {
        detail::close_fd(fd);
      }
    }
  }

  PartyNode& node_;
  Topology topo_;
  std::unique_ptr<TcpListener> listener_;
  std::thread acceptor_;
  std::mutex links_mu_;
  std::vector<std::unique_ptr<TcpLink>> links_;
};

}  // namespace psh

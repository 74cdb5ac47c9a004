// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "psel/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "psel/error.h"

namespace psel {

void NetworkModel::validate() const {
  PSEL_ENFORCE(bandwidth > 0 && std::isfinite(bandwidth), kConfig,
               "bandwidth must be positive, got " << bandwidth);
  PSEL_ENFORCE(latency >= 0 && std::isfinite(latency), kConfig,
               "latency must be non-negative, got " << latency);
}

double simulated_time(std::uint64_t rounds, std::uint64_t transfer_bytes, const NetworkModel& model) {
  return static_cast<double>(rounds) * model.latency +
         static_cast<double>(transfer_bytes) / model.bandwidth;
}

TagCost& TagCost::operator+=(const TagCost& o) {
  rounds += o.rounds;
  bytes += o.bytes;
  transfer_bytes += o.transfer_bytes;
  seconds += o.seconds;
  flops += o.flops;
  return *this;
}

CostLedger::CostLedger(NetworkModel model) : model_(model) { model_.validate(); }

TraceStep& CostLedger::open_step(const std::string& tag) {
  TraceStep step;
  step.tag = tag;
  step.stage = stage_;
  step.batch = batch_;
  step.flops = pending_flops_;
  pending_flops_ = 0;
  pending_tag_.clear();
  trace_.push_back(std::move(step));
  return trace_.back();
}

void CostLedger::record_exchange(const std::string& tag, std::uint64_t sent0, std::uint64_t sent1) {
  const std::uint64_t transfer = std::max(sent0, sent1);
  TagCost c;
  c.rounds = 1;
  c.bytes = sent0 + sent1;
  c.transfer_bytes = transfer;
  c.seconds = simulated_time(1, transfer, model_);
  tags_[tag] += c;

  TraceStep& step = open_step(tag);
  step.rounds = c.rounds;
  step.bytes = c.bytes;
  step.transfer_bytes = c.transfer_bytes;
  step.seconds = c.seconds;
}

void CostLedger::charge(const std::string& tag, std::uint64_t rounds, std::uint64_t bytes) {
  TagCost c;
  c.rounds = rounds;
  c.bytes = bytes;
  c.transfer_bytes = bytes;
  c.seconds = simulated_time(rounds, bytes, model_);
  tags_[tag] += c;

  TraceStep& step = open_step(tag);
  step.rounds = c.rounds;
  step.bytes = c.bytes;
  step.transfer_bytes = c.transfer_bytes;
  step.seconds = c.seconds;
}

void CostLedger::record_analytic(const std::string& tag, std::uint64_t sent0, std::uint64_t sent1) {
  TagCost c;
  c.rounds = 1;
  c.bytes = sent0 + sent1;
  c.transfer_bytes = std::max(sent0, sent1);
  c.seconds = simulated_time(1, c.transfer_bytes, model_);
  analytic_[tag] += c;
}

void CostLedger::add_flops(const std::string& tag, std::uint64_t flops) {
  tags_[tag].flops += flops;
  pending_flops_ += flops;
  pending_tag_ = tag;
}

void CostLedger::set_position(int stage, int batch) {
  stage_ = stage;
  batch_ = batch;
}

void CostLedger::flush() {
  if (pending_flops_ == 0) return;
  open_step(pending_tag_);
}

TagCost CostLedger::total() const {
  TagCost t;
  for (const auto& [tag, c] : tags_) t += c;
  return t;
}

bool CostLedger::operator==(const CostLedger& o) const {
  return model_ == o.model_ && tags_ == o.tags_ && analytic_ == o.analytic_ && trace_ == o.trace_;
}

std::vector<CostRow> cost_rows(const CostLedger& ledger) {
  const TagCost total = ledger.total();
  std::vector<CostRow> rows;
  for (const auto& [tag, c] : ledger.tags()) {
    CostRow r;
    r.tag = tag;
    r.rounds = c.rounds;
    r.bytes = c.bytes;
    r.seconds = c.seconds;
    r.byte_share = total.bytes ? 100.0 * static_cast<double>(c.bytes) / total.bytes : 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_cost_table(const std::vector<CostRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "module" << std::right << std::setw(10) << "rounds"
     << std::setw(16) << "bytes" << std::setw(14) << "time(s)" << std::setw(10) << "bytes%"
     << "\n";
  std::uint64_t rounds = 0, bytes = 0;
  double seconds = 0, share = 0;
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << r.tag << std::right << std::setw(10) << r.rounds
       << std::setw(16) << r.bytes << std::setw(14) << std::fixed << std::setprecision(4)
       << r.seconds << std::setw(10) << std::setprecision(2) << r.byte_share << "\n";
    rounds += r.rounds;
    bytes += r.bytes;
    seconds += r.seconds;
    share += r.byte_share;
  }
  os << std::left << std::setw(20) << "total" << std::right << std::setw(10) << rounds
     << std::setw(16) << bytes << std::setw(14) << std::fixed << std::setprecision(4) << seconds
     << std::setw(10) << std::setprecision(2) << share << "\n";
  return os.str();
}

nlohmann::ordered_json cost_json(const CostLedger& ledger) {
  nlohmann::ordered_json j;
  j["bandwidth"] = ledger.model().bandwidth;
  j["latency"] = ledger.model().latency;
  auto& rows = j["modules"] = nlohmann::ordered_json::array();
  for (const auto& r : cost_rows(ledger)) {
    rows.push_back({{"tag", r.tag},
                    {"rounds", r.rounds},
                    {"bytes", r.bytes},
                    {"seconds", r.seconds},
                    {"byte_share", r.byte_share}});
  }
  const TagCost t = ledger.total();
  j["total"] = {{"rounds", t.rounds}, {"bytes", t.bytes}, {"seconds", t.seconds},
                {"flops", t.flops}};
  auto& an = j["analytic"] = nlohmann::ordered_json::object();
  for (const auto& [tag, c] : ledger.analytic()) {
    an[tag] = {{"rounds", c.rounds}, {"bytes", c.bytes}, {"seconds", c.seconds}};
  }
  return j;
}

// ---------------------------------------------------------------------------

std::string_view reveal_kind_name(RevealKind kind) {
  switch (kind) {
    case RevealKind::kComparisonBit:
      return "comparison_bit";
    case RevealKind::kFinalIndices:
      return "final_indices";
    case RevealKind::kAppraisalMean:
      return "appraisal_mean";
    case RevealKind::kAppraisalBit:
      return "appraisal_bit";
    case RevealKind::kIntermediate:
      return "intermediate";
  }
  return "unknown";
}

void RevealLog::append(RevealKind kind, std::string tag, std::vector<double> values) {
  entries_.push_back({kind, std::move(tag), std::move(values)});
}

std::size_t RevealLog::count(RevealKind kind) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.kind == kind) n += e.values.size();
  }
  return n;
}

bool RevealLog::audit(std::string* why) const {
  for (const auto& e : entries_) {
    if (e.kind == RevealKind::kIntermediate) {
      if (why) *why = "intermediate value opened by '" + e.tag + "'";
      return false;
    }
    if (e.kind == RevealKind::kComparisonBit || e.kind == RevealKind::kAppraisalBit) {
      for (double v : e.values) {
        if (v != 0.0 && v != 1.0) {
          if (why) *why = "non-binary value logged as a bit by '" + e.tag + "'";
          return false;
        }
      }
    }
  }
  return true;
}

std::string RevealLog::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : entries_) {
    feed(static_cast<std::uint64_t>(e.kind));
    for (char c : e.tag) feed(static_cast<unsigned char>(c));
    for (double v : e.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      feed(bits);
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 31;

}  // namespace

void put_le64(std::uint64_t v, std::uint8_t* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  const std::size_t payload_bytes = frame.payload.size() * 8;
  PSEL_ENFORCE(payload_bytes + 1 < kMaxFrameBytes, kTransport, "frame too large");
  const auto length = static_cast<std::uint32_t>(payload_bytes + 1);
  std::vector<std::uint8_t> out(4 + length);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(length >> (8 * i));
  out[4] = static_cast<std::uint8_t>(frame.type);
  for (std::size_t i = 0; i < frame.payload.size(); ++i) put_le64(frame.payload[i], &out[5 + 8 * i]);
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  PSEL_ENFORCE(bytes.size() >= 5, kTransport, "frame shorter than header (" << bytes.size() << " bytes)");
  std::uint32_t length = 0;
  for (int i = 0; i < 4; ++i) length |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  PSEL_ENFORCE(length >= 1 && bytes.size() == 4 + static_cast<std::size_t>(length), kTransport,
               "frame length field " << length << " disagrees with " << bytes.size() << " bytes");
  PSEL_ENFORCE((length - 1) % 8 == 0, kTransport, "payload of " << length - 1 << " bytes is not word aligned");
  const auto type = static_cast<MsgType>(bytes[4]);
  PSEL_ENFORCE(type == MsgType::kExchange || type == MsgType::kAbort, kTransport,
               "unknown message type " << static_cast<int>(bytes[4]));
  Frame f;
  f.type = type;
  f.payload.resize((length - 1) / 8);
  for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = get_le64(&bytes[5 + 8 * i]);
  return f;
}

// ---------------------------------------------------------------------------
// Loopback

namespace {

struct LoopbackMessage {
  std::uint64_t tag;
  std::uint64_t seq;
  std::vector<RingElement> payload;
};

struct LoopbackHub {
  std::mutex mu;
  std::condition_variable cv;
  std::array<std::deque<LoopbackMessage>, 2> inbox;
  bool aborted = false;
};

class LoopbackChannel : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<LoopbackHub> hub, int party) : hub_(std::move(hub)), party_(party) {}

  std::vector<RingElement> exchange(std::uint64_t tag, std::span<const RingElement> payload) override {
    const std::uint64_t seq = seq_++;
    std::unique_lock lock(hub_->mu);
    PSEL_ENFORCE(!hub_->aborted, kTransport, "channel aborted");
    hub_->inbox[1 - party_].push_back({tag, seq, {payload.begin(), payload.end()}});
    hub_->cv.notify_all();
    auto& mine = hub_->inbox[party_];
    hub_->cv.wait(lock, [&] { return !mine.empty() || hub_->aborted; });
    PSEL_ENFORCE(!mine.empty(), kTransport, "peer aborted the session");
    LoopbackMessage msg = std::move(mine.front());
    mine.pop_front();
    if (msg.tag != tag || msg.seq != seq) {
      hub_->aborted = true;
      hub_->cv.notify_all();
      PSEL_ENFORCE(false, kProtocol,
                   "protocol desync at round " << seq << ": peer is at round " << msg.seq
                                               << (msg.tag != tag ? " with a different tag" : ""));
    }
    return std::move(msg.payload);
  }

  void abort() override {
    std::lock_guard lock(hub_->mu);
    hub_->aborted = true;
    hub_->cv.notify_all();
  }

 private:
  std::shared_ptr<LoopbackHub> hub_;
  int party_;
  std::uint64_t seq_ = 0;
};

}  // namespace

std::array<std::unique_ptr<Channel>, 2> make_loopback_pair() {
  auto hub = std::make_shared<LoopbackHub>();
  return {std::make_unique<LoopbackChannel>(hub, 0), std::make_unique<LoopbackChannel>(hub, 1)};
}

// ---------------------------------------------------------------------------
// Sockets

SocketChannel::SocketChannel(int fd) : fd_(fd) {
  PSEL_ENFORCE(fd_ >= 0, kTransport, "invalid socket descriptor");
  const int flags = ::fcntl(fd_, F_GETFL, 0);
  ::fcntl(fd_, F_SETFL, flags | O_NONBLOCK);
}

SocketChannel::~SocketChannel() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<RingElement> SocketChannel::exchange(std::uint64_t tag,
                                                 std::span<const RingElement> payload) {
  PSEL_ENFORCE(fd_ >= 0, kTransport, "socket closed");
  const std::uint64_t seq = seq_++;
  Frame out;
  out.type = MsgType::kExchange;
  out.payload.reserve(payload.size() + 2);
  out.payload.push_back(tag);
  out.payload.push_back(seq);
  out.payload.insert(out.payload.end(), payload.begin(), payload.end());
  const std::vector<std::uint8_t> wire = encode_frame(out);

  std::size_t sent = 0;
  std::vector<std::uint8_t> in(4);
  std::size_t got = 0;
  bool have_length = false;
  // Write our frame and read the peer's concurrently; both sides send first,
  // so a blocking write could deadlock once socket buffers fill.
  while (sent < wire.size() || got < in.size()) {
    pollfd pfd{fd_, 0, 0};
    if (sent < wire.size()) pfd.events |= POLLOUT;
    if (got < in.size()) pfd.events |= POLLIN;
    const int rc = ::poll(&pfd, 1, -1);
    if (rc < 0 && errno == EINTR) continue;
    PSEL_ENFORCE(rc > 0, kTransport, "poll failed: " << std::strerror(errno));
    if ((pfd.revents & POLLOUT) && sent < wire.size()) {
      const ssize_t n = ::send(fd_, wire.data() + sent, wire.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
        PSEL_ENFORCE(false, kTransport, "send failed: " << std::strerror(errno));
      }
      if (n > 0) sent += static_cast<std::size_t>(n);
    }
    if ((pfd.revents & (POLLIN | POLLHUP | POLLERR)) && got < in.size()) {
      const ssize_t n = ::recv(fd_, in.data() + got, in.size() - got, 0);
      if (n == 0) PSEL_ENFORCE(false, kTransport, "peer closed the connection");
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
        PSEL_ENFORCE(false, kTransport, "recv failed: " << std::strerror(errno));
      }
      if (n > 0) got += static_cast<std::size_t>(n);
      if (!have_length && got == 4) {
        std::uint32_t length = 0;
        for (int i = 0; i < 4; ++i) length |= static_cast<std::uint32_t>(in[i]) << (8 * i);
        PSEL_ENFORCE(length >= 1 && length < kMaxFrameBytes, kTransport, "bad frame length " << length);
        in.resize(4 + static_cast<std::size_t>(length));
        have_length = true;
      }
    }
  }

  Frame frame = decode_frame(in);
  PSEL_ENFORCE(frame.type != MsgType::kAbort, kTransport, "peer aborted the session");
  PSEL_ENFORCE(frame.payload.size() >= 2, kTransport, "exchange frame missing round header");
  PSEL_ENFORCE(frame.payload[0] == tag && frame.payload[1] == seq, kProtocol,
               "protocol desync at round " << seq << ": peer is at round " << frame.payload[1]
                                           << (frame.payload[0] != tag ? " with a different tag" : ""));
  return {frame.payload.begin() + 2, frame.payload.end()};
}

void SocketChannel::abort() {
  if (fd_ < 0) return;
  Frame f;
  f.type = MsgType::kAbort;
  const auto wire = encode_frame(f);
  [[maybe_unused]] ssize_t n = ::send(fd_, wire.data(), wire.size(), MSG_NOSIGNAL);
  ::shutdown(fd_, SHUT_RDWR);
}

std::array<int, 2> stream_socket_pair() {
  int fds[2];
  PSEL_ENFORCE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0, kTransport,
               "socketpair failed: " << std::strerror(errno));
  return {fds[0], fds[1]};
}

int tcp_listen(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  PSEL_ENFORCE(fd >= 0, kTransport, "socket failed: " << std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 1) != 0) {
    const int err = errno;
    ::close(fd);
    PSEL_ENFORCE(false, kTransport, "cannot listen on port " << port << ": " << std::strerror(err));
  }
  return fd;
}

int tcp_accept(int listen_fd) {
  const int fd = ::accept(listen_fd, nullptr, nullptr);
  PSEL_ENFORCE(fd >= 0, kTransport, "accept failed: " << std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

int tcp_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  PSEL_ENFORCE(::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) == 0 && res, kTransport,
               "cannot resolve " << host);
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0;
  const int err = errno;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd >= 0) ::close(fd);
    PSEL_ENFORCE(false, kTransport, "cannot connect to " << host << ":" << port << ": " << std::strerror(err));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace psel

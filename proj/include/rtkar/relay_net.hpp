#ifndef RTKAR_RELAY_NET_HPP
#define RTKAR_RELAY_NET_HPP

// Socket transports for RelayCore: a newline-delimited TCP endpoint and a
// WebSocket endpoint for browsers (one envelope per text frame), plus a
// small blocking TCP client.
//
// The server runs one io_context on its own thread. Each session reads
// lines, hands them to the core, and writes whatever the core queued for it,
// one write in flight at a time.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rtkar/envelope.hpp"
#include "rtkar/error.hpp"
#include "rtkar/relay.hpp"

namespace rtkar::relay {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t tcp_port = 4710;  ///< 0 picks a free port
  std::uint16_t ws_port = 4711;   ///< 0 picks a free port
  bool enable_ws = true;
  /// Period of unsolicited METRICS pushes to consoles; 0 disables.
  double metrics_interval_s = 0.0;
  std::size_t max_line_bytes = 1 << 20;
};

class RelayServer {
 public:
  explicit RelayServer(RelayConfig config = {}, ServerOptions options = {})
      : options_(std::move(options)),
        core_(config),
        tcp_acceptor_(ioc_),
        ws_acceptor_(ioc_),
        metrics_timer_(ioc_),
        signals_(ioc_) {}

  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  ~RelayServer() { stop(); }

  /// Binds both endpoints and starts serving on a background thread.
  void start() {
    if (thread_.joinable()) return;
    tcp_port_ = bind(tcp_acceptor_, options_.tcp_port);
    if (options_.enable_ws) ws_port_ = bind(ws_acceptor_, options_.ws_port);
    accept_tcp();
    if (options_.enable_ws) accept_ws();
    if (options_.metrics_interval_s > 0.0) schedule_metrics();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  /// Stops on SIGINT/SIGTERM. Call before start().
  void stop_on_signals() {
    signals_.add(SIGINT);
    signals_.add(SIGTERM);
    signals_.async_wait([this](const boost::system::error_code& ec, int) {
      if (!ec) shutdown_all();
    });
  }

  /// Blocks until the server has stopped.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  void stop() {
    if (!thread_.joinable()) return;
    net::post(ioc_, [this] { shutdown_all(); });
    thread_.join();
  }

  std::uint16_t tcp_port() const { return tcp_port_; }
  std::uint16_t ws_port() const { return ws_port_; }
  RelayCore& core() { return core_; }
  const ServerOptions& options() const { return options_; }

 private:
  class Session : public std::enable_shared_from_this<Session> {
   public:
    explicit Session(std::uint64_t serial) : serial_(serial) {}
    virtual ~Session() = default;
    virtual void close() = 0;

   protected:
    std::uint64_t serial_;
  };

  class TcpSession;
  class WsSession;

  std::uint16_t bind(tcp::acceptor& acceptor, std::uint16_t port) {
    try {
      const tcp::endpoint ep(net::ip::make_address(options_.bind_address), port);
      acceptor.open(ep.protocol());
      acceptor.set_option(net::socket_base::reuse_address(true));
      acceptor.bind(ep);
      acceptor.listen();
      return acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
      throw ConnectionError("cannot listen on " + options_.bind_address + ":" +
                            std::to_string(port) + ": " + e.what());
    }
  }

  void accept_tcp();
  void accept_ws();

  void schedule_metrics() {
    metrics_timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(options_.metrics_interval_s)));
    metrics_timer_.async_wait([this](const boost::system::error_code& ec) {
      if (ec) return;
      core_.broadcast_metrics();
      schedule_metrics();
    });
  }

  // Bookkeeping for shutdown; io thread only.
  void track(std::uint64_t serial, std::weak_ptr<Session> s) { sessions_[serial] = std::move(s); }
  void forget(std::uint64_t serial) { sessions_.erase(serial); }

  // Runs on the io thread.
  void shutdown_all() {
    boost::system::error_code ignored;
    tcp_acceptor_.close(ignored);
    ws_acceptor_.close(ignored);
    metrics_timer_.cancel();
    signals_.cancel(ignored);
    auto sessions = sessions_;
    for (auto& [serial, weak] : sessions) {
      if (auto s = weak.lock()) s->close();
    }
    sessions_.clear();
    // Queued behind the session closes above.
    net::post(ioc_, [this] { ioc_.stop(); });
  }

  ServerOptions options_;
  RelayCore core_;
  net::io_context ioc_;
  tcp::acceptor tcp_acceptor_;
  tcp::acceptor ws_acceptor_;
  net::steady_timer metrics_timer_;
  net::signal_set signals_;
  std::map<std::uint64_t, std::weak_ptr<Session>> sessions_;
  std::uint64_t next_serial_ = 0;
  std::uint16_t tcp_port_ = 0;
  std::uint16_t ws_port_ = 0;
  std::thread thread_;
};

class RelayServer::TcpSession final : public RelayServer::Session {
 public:
  TcpSession(RelayServer& server, tcp::socket socket)
      : Session(++server.next_serial_),
        server_(server),
        socket_(std::move(socket)),
        strand_(socket_.get_executor()),
        buffer_(server.options_.max_line_bytes),
        hello_timer_(strand_) {}

  void start() {
    auto self = std::static_pointer_cast<TcpSession>(shared_from_this());
    std::weak_ptr<TcpSession> weak = self;
    auto strand = strand_;
    id_ = server_.core_.open_session([weak, strand] {
      if (auto s = weak.lock()) net::post(strand, [s] { s->pump(); });
    });
    server_.track(serial_, self);
    boost::system::error_code ignored;
    socket_.set_option(tcp::no_delay(true), ignored);
    net::dispatch(strand_, [self] {
      self->hello_timer_.expires_after(
          std::chrono::milliseconds(self->server_.core_.config().hello_timeout_ms));
      self->hello_timer_.async_wait([self](const boost::system::error_code& ec) {
        if (!ec) self->server_.core_.expire_if_unregistered(self->id_);
      });
      self->read();
    });
  }

  void close() override {
    auto self = shared_from_this();
    net::dispatch(strand_, [this, self] { shutdown(); });
  }

 private:
  void read() {
    auto self = shared_from_this();
    net::async_read_until(socket_, buffer_, '\n',
                          [this, self](const boost::system::error_code& ec, std::size_t n) {
                            on_read(ec, n);
                          });
  }

  void on_read(const boost::system::error_code& ec, std::size_t n) {
    if (ec || closed_) {
      shutdown();
      return;
    }
    const auto data = buffer_.data();
    std::string line(net::buffers_begin(data), net::buffers_begin(data) + static_cast<std::ptrdiff_t>(n) - 1);
    buffer_.consume(n);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      const HandleOutcome out = server_.core_.handle_line(id_, line);
      if (server_.core_.registered(id_)) hello_timer_.cancel();
      if (out.close) {
        pump();
        return;  // stop reading; pump closes once the notice is written
      }
    }
    read();
  }

  void pump() {
    if (closed_ || writing_) return;
    auto item = server_.core_.pop(id_);
    if (!item) {
      if (server_.core_.closing(id_)) shutdown();
      return;
    }
    writing_ = true;
    out_ = std::move(item->line);
    out_.push_back('\n');
    enqueued_ = item->enqueued;
    auto self = shared_from_this();
    net::async_write(socket_, net::buffer(out_),
                     [this, self](const boost::system::error_code& ec, std::size_t) {
                       writing_ = false;
                       if (ec) {
                         shutdown();
                         return;
                       }
                       server_.core_.record_write(enqueued_);
                       pump();
                     });
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    hello_timer_.cancel();
    server_.core_.close_session(id_);
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    net::post(server_.ioc_, [&server = server_, serial = serial_] { server.forget(serial); });
  }

  RelayServer& server_;
  tcp::socket socket_;
  net::any_io_executor strand_;
  net::streambuf buffer_;
  net::steady_timer hello_timer_;
  SessionId id_ = 0;
  bool writing_ = false;
  bool closed_ = false;
  std::string out_;
  SteadyTime enqueued_;
};

class RelayServer::WsSession final : public RelayServer::Session {
 public:
  WsSession(RelayServer& server, tcp::socket socket)
      : Session(++server.next_serial_),
        server_(server),
        strand_(socket.get_executor()),
        ws_(std::move(socket)),
        hello_timer_(strand_) {}

  void start() {
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    server_.track(serial_, self);
    net::dispatch(strand_, [self] {
      self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      self->ws_.read_message_max(self->server_.options_.max_line_bytes);
      self->ws_.async_accept([self](const boost::system::error_code& ec) {
        net::dispatch(self->strand_, [self, ec] { self->on_accept(ec); });
      });
    });
  }

  void close() override {
    auto self = shared_from_this();
    net::dispatch(strand_, [this, self] { shutdown(); });
  }

 private:
  void on_accept(const boost::system::error_code& ec) {
    if (ec) return;
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    std::weak_ptr<WsSession> weak = self;
    auto strand = strand_;
    id_ = server_.core_.open_session([weak, strand] {
      if (auto s = weak.lock()) net::post(strand, [s] { s->pump(); });
    });
    opened_ = true;
    hello_timer_.expires_after(std::chrono::milliseconds(server_.core_.config().hello_timeout_ms));
    hello_timer_.async_wait([self](const boost::system::error_code& e) {
      if (!e) self->server_.core_.expire_if_unregistered(self->id_);
    });
    read();
  }

  void read() {
    auto self = shared_from_this();
    ws_.async_read(buffer_, [this, self](const boost::system::error_code& ec, std::size_t) {
      net::dispatch(strand_, [this, self, ec] { on_read(ec); });
    });
  }

  void on_read(const boost::system::error_code& ec) {
    if (ec || closed_) {
      shutdown();
      return;
    }
    const std::string message = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    // A frame normally holds one envelope; tolerate several separated by newlines.
    std::string_view rest = message;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      const HandleOutcome out = server_.core_.handle_line(id_, line);
      if (server_.core_.registered(id_)) hello_timer_.cancel();
      if (out.close) {
        pump();
        return;
      }
    }
    read();
  }

  void pump() {
    if (closed_ || writing_ || !opened_) return;
    auto item = server_.core_.pop(id_);
    if (!item) {
      if (server_.core_.closing(id_)) shutdown();
      return;
    }
    writing_ = true;
    out_ = std::move(item->line);
    enqueued_ = item->enqueued;
    ws_.text(true);
    auto self = shared_from_this();
    ws_.async_write(net::buffer(out_), [this, self](const boost::system::error_code& ec, std::size_t) {
      net::dispatch(strand_, [this, self, ec] {
        writing_ = false;
        if (ec) {
          shutdown();
          return;
        }
        server_.core_.record_write(enqueued_);
        pump();
      });
    });
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    hello_timer_.cancel();
    if (opened_) server_.core_.close_session(id_);
    net::post(server_.ioc_, [&server = server_, serial = serial_] { server.forget(serial); });
    boost::system::error_code ignored;
    auto& sock = beast::get_lowest_layer(ws_);
    sock.shutdown(tcp::socket::shutdown_both, ignored);
    sock.close(ignored);
  }

  RelayServer& server_;
  net::any_io_executor strand_;
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  net::steady_timer hello_timer_;
  SessionId id_ = 0;
  bool opened_ = false;
  bool writing_ = false;
  bool closed_ = false;
  std::string out_;
  SteadyTime enqueued_;
};

inline void RelayServer::accept_tcp() {
  tcp_acceptor_.async_accept(net::make_strand(ioc_), [this](const boost::system::error_code& ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<TcpSession>(*this, std::move(socket))->start();
    accept_tcp();
  });
}

inline void RelayServer::accept_ws() {
  ws_acceptor_.async_accept(net::make_strand(ioc_), [this](const boost::system::error_code& ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<WsSession>(*this, std::move(socket))->start();
    accept_ws();
  });
}

// ---------------------------------------------------------------------------
// Client

/// Blocking line client. A reader thread collects incoming lines; callers
/// poll or wait on them.
class RelayClient {
 public:
  RelayClient() = default;
  RelayClient(const RelayClient&) = delete;
  RelayClient& operator=(const RelayClient&) = delete;
  ~RelayClient() { close(); }

  void connect(const std::string& host, std::uint16_t port) {
    close();
    try {
      tcp::resolver resolver(ioc_);
      net::connect(socket_, resolver.resolve(host, std::to_string(port)));
      socket_.set_option(tcp::no_delay(true));
    } catch (const boost::system::system_error& e) {
      throw ConnectionError("relay unreachable at " + host + ":" + std::to_string(port) + ": " +
                            e.code().message());
    }
    {
      std::lock_guard lock(mu_);
      inbox_.clear();
      eof_ = false;
    }
    reader_ = std::thread([this] { read_loop(); });
  }

  void send(std::string_view line) {
    std::string framed(line);
    framed.push_back('\n');
    std::lock_guard lock(write_mu_);
    boost::system::error_code ec;
    net::write(socket_, net::buffer(framed), ec);
    if (ec) throw ConnectionError("relay write failed: " + ec.message());
  }

  /// Registers with the relay and waits for the acknowledgement.
  void hello(Role role, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    send(encode_envelope({MsgType::HELLO, role, "", 0, 0, ""}));
    const auto line = receive(timeout);
    if (!line) throw ConnectionError("no HELLO acknowledgement from relay");
    const Envelope ack = decode_envelope(*line);
    if (ack.msg_type != MsgType::HELLO) throw ProtocolError("relay refused HELLO: " + ack.payload);
  }

  /// Next received line, or nullopt on timeout or once the relay has closed
  /// the connection and everything has been read.
  std::optional<std::string> receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || eof_; });
    if (inbox_.empty()) return std::nullopt;
    std::string line = std::move(inbox_.front());
    inbox_.pop_front();
    return line;
  }

  /// Everything received so far, without waiting.
  std::vector<std::string> drain() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out(std::make_move_iterator(inbox_.begin()),
                                 std::make_move_iterator(inbox_.end()));
    inbox_.clear();
    return out;
  }

  /// True once the relay closed the connection.
  bool closed_by_peer() const {
    std::lock_guard lock(mu_);
    return eof_;
  }

  void close() {
    if (reader_.joinable()) {
      ::shutdown(socket_.native_handle(), SHUT_RDWR);
      reader_.join();
    }
    boost::system::error_code ignored;
    socket_.close(ignored);
  }

 private:
  void read_loop() {
    net::streambuf buf;
    for (;;) {
      boost::system::error_code ec;
      const std::size_t n = net::read_until(socket_, buf, '\n', ec);
      if (ec) break;
      const auto data = buf.data();
      std::string line(net::buffers_begin(data), net::buffers_begin(data) + static_cast<std::ptrdiff_t>(n) - 1);
      buf.consume(n);
      std::lock_guard lock(mu_);
      inbox_.push_back(std::move(line));
      cv_.notify_all();
    }
    std::lock_guard lock(mu_);
    eof_ = true;
    cv_.notify_all();
  }

  net::io_context ioc_;
  tcp::socket socket_{ioc_};
  std::thread reader_;
  mutable std::mutex mu_;
  std::mutex write_mu_;
  std::condition_variable cv_;
  std::deque<std::string> inbox_;
  bool eof_ = false;
};

}  // namespace rtkar::relay

#endif  // RTKAR_RELAY_NET_HPP

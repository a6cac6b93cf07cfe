#include "fedhql/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

namespace fedhql::wire {

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'H', 'Q', 'L'};
constexpr std::size_t kMaxTcpPayload = 1u << 26;  // guards a corrupt stream

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
double get_f64(const std::uint8_t* p) {
    return std::bit_cast<double>(get_u64(p));
}

void put_f64_vec(std::vector<std::uint8_t>& out, const std::vector<double>& v) {
    for (double x : v) put_f64(out, x);
}

std::vector<double> get_f64_vec(const std::uint8_t* p, std::size_t count) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = get_f64(p + 8 * i);
    return v;
}

}  // namespace

std::uint8_t kind_of(const Message& m) {
    return static_cast<std::uint8_t>(m.body.index());
}

std::string kind_name(std::uint8_t kind) {
    switch (kind) {
        case 0: return "SelfLearnSignal";
        case 1: return "QueryState";
        case 2: return "QValuesReply";
        case 3: return "FedTDTarget";
        case 4: return "ImproveAck";
        case 5: return "Shutdown";
        default: return "Unknown(" + std::to_string(kind) + ")";
    }
}

std::string to_string(DecodeError e) {
    switch (e) {
        case DecodeError::None: return "None";
        case DecodeError::BadMagic: return "BadMagic";
        case DecodeError::BadVersion: return "BadVersion";
        case DecodeError::UnknownKind: return "UnknownKind";
        case DecodeError::LengthMismatch: return "LengthMismatch";
        case DecodeError::TruncatedFrame: return "TruncatedFrame";
    }
    return "?";
}

std::vector<std::uint8_t> encode(const Message& m) {
    std::vector<std::uint8_t> payload;
    std::visit(
        [&payload](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, SelfLearnSignal>) {
                put_u64(payload, body.steps);
            } else if constexpr (std::is_same_v<T, QueryState>) {
                payload.push_back(static_cast<std::uint8_t>(body.tag));
                put_f64_vec(payload, body.state);
            } else if constexpr (std::is_same_v<T, QValuesReply>) {
                payload.push_back(static_cast<std::uint8_t>(body.tag));
                put_f64_vec(payload, body.q);
            } else if constexpr (std::is_same_v<T, FedTDTarget>) {
                put_f64_vec(payload, body.state);
                put_u16(payload, body.action);
                put_f64(payload, body.target);
            }
            // ImproveAck and Shutdown carry no payload.
        },
        m.body);

    if (payload.size() > 0xFFFFFFFFull)
        throw std::length_error("frame payload exceeds 2^32 - 1 bytes");

    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderSize + payload.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kWireVersion);
    out.push_back(kind_of(m));
    put_u64(out, m.round_id);
    put_u16(out, m.agent_id);
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

DecodeError decode(const std::vector<std::uint8_t>& bytes, Message& out,
                   std::size_t* consumed) {
    if (bytes.size() < kFrameHeaderSize) return DecodeError::TruncatedFrame;
    const std::uint8_t* p = bytes.data();
    if (std::memcmp(p, kMagic, 4) != 0) return DecodeError::BadMagic;
    if (p[4] != kWireVersion) return DecodeError::BadVersion;
    const std::uint8_t kind = p[5];
    if (kind > 5) return DecodeError::UnknownKind;
    const std::uint64_t round_id = get_u64(p + 6);
    const std::uint16_t agent_id = get_u16(p + 14);
    const std::size_t len = get_u32(p + 16);
    if (bytes.size() - kFrameHeaderSize < len) return DecodeError::TruncatedFrame;
    const std::uint8_t* body = p + kFrameHeaderSize;

    Message m;
    m.round_id = round_id;
    m.agent_id = agent_id;
    switch (kind) {
        case 0: {
            if (len != 8) return DecodeError::LengthMismatch;
            m.body = SelfLearnSignal{get_u64(body)};
            break;
        }
        case 1:
        case 2: {
            if (len < 1 || (len - 1) % 8 != 0) return DecodeError::LengthMismatch;
            if (body[0] > 1) return DecodeError::LengthMismatch;
            const StateTag tag = static_cast<StateTag>(body[0]);
            std::vector<double> vals = get_f64_vec(body + 1, (len - 1) / 8);
            if (kind == 1)
                m.body = QueryState{tag, std::move(vals)};
            else
                m.body = QValuesReply{tag, std::move(vals)};
            break;
        }
        case 3: {
            if (len < 10 || (len - 10) % 8 != 0) return DecodeError::LengthMismatch;
            const std::size_t dim = (len - 10) / 8;
            FedTDTarget t;
            t.state = get_f64_vec(body, dim);
            t.action = get_u16(body + 8 * dim);
            t.target = get_f64(body + 8 * dim + 2);
            m.body = std::move(t);
            break;
        }
        case 4: {
            if (len != 0) return DecodeError::LengthMismatch;
            m.body = ImproveAck{};
            break;
        }
        case 5: {
            if (len != 0) return DecodeError::LengthMismatch;
            m.body = Shutdown{};
            break;
        }
    }
    out = std::move(m);
    if (consumed) *consumed = kFrameHeaderSize + len;
    return DecodeError::None;
}

// ---------------------------------------------------------------------------
// In-process backend.

namespace {

class MessageQueue {
public:
    void push(Message m) {
        {
            std::lock_guard lock(mu_);
            items_.push_back(std::move(m));
        }
        cv_.notify_all();
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    bool closed() {
        std::lock_guard lock(mu_);
        return closed_ && items_.empty();
    }

    /// Blocks until a message is available; empty optional on close or on
    /// reaching `deadline` (when provided).
    std::optional<Message> pop(
        const std::optional<std::chrono::steady_clock::time_point>& deadline) {
        std::unique_lock lock(mu_);
        auto ready = [this] { return !items_.empty() || closed_; };
        if (deadline) {
            if (!cv_.wait_until(lock, *deadline, ready)) return std::nullopt;
        } else {
            cv_.wait(lock, ready);
        }
        if (items_.empty()) return std::nullopt;
        Message m = std::move(items_.front());
        items_.pop_front();
        return m;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> items_;
    bool closed_ = false;
};

struct InprocLink {
    MessageQueue to_agent;
    MessageQueue to_server;
};

class InprocEndpoint final : public AgentEndpoint {
public:
    explicit InprocEndpoint(std::shared_ptr<InprocLink> link)
        : link_(std::move(link)) {}

    Message recv() override {
        auto m = link_->to_agent.pop(std::nullopt);
        if (!m) throw std::runtime_error("agent endpoint: channel closed");
        return *m;
    }

    void send(const Message& m) override { link_->to_server.push(m); }

private:
    std::shared_ptr<InprocLink> link_;
};

Message expect_reply(std::optional<Message> m, int agent, std::uint8_t kind,
                     std::uint64_t round_id) {
    if (!m)
        throw RoundAborted(agent, "agent " + std::to_string(agent) +
                                      " did not reply with " + kind_name(kind) +
                                      " before the round timeout");
    if (kind_of(*m) != kind || m->round_id != round_id)
        throw RoundAborted(agent, "agent " + std::to_string(agent) +
                                      " sent " + kind_name(kind_of(*m)) +
                                      " (round " + std::to_string(m->round_id) +
                                      "), expected " + kind_name(kind) +
                                      " (round " + std::to_string(round_id) + ")");
    return *m;
}

class InprocHub final : public ServerHub {
public:
    explicit InprocHub(std::vector<std::shared_ptr<InprocLink>> links)
        : links_(std::move(links)) {}

    ~InprocHub() override {
        for (auto& link : links_) link->to_agent.close();
    }

    int agent_count() const override { return static_cast<int>(links_.size()); }

    void send_to(int agent, const Message& m) override {
        links_[static_cast<std::size_t>(agent)]->to_agent.push(m);
    }

    void broadcast(const Message& m) override {
        for (auto& link : links_) link->to_agent.push(m);
    }

    std::vector<Message> collect(std::uint8_t kind, std::uint64_t round_id,
                                 int timeout_ms) override {
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(timeout_ms);
        std::vector<Message> replies;
        replies.reserve(links_.size());
        for (std::size_t i = 0; i < links_.size(); ++i) {
            auto m = links_[i]->to_server.pop(deadline);
            replies.push_back(
                expect_reply(std::move(m), static_cast<int>(i), kind, round_id));
        }
        return replies;
    }

private:
    std::vector<std::shared_ptr<InprocLink>> links_;
};

}  // namespace

InprocTransport make_inproc_transport(int n_agents) {
    std::vector<std::shared_ptr<InprocLink>> links;
    InprocTransport t;
    for (int i = 0; i < n_agents; ++i) {
        auto link = std::make_shared<InprocLink>();
        t.endpoints.push_back(std::make_unique<InprocEndpoint>(link));
        links.push_back(std::move(link));
    }
    t.hub = std::make_unique<InprocHub>(std::move(links));
    return t;
}

// ---------------------------------------------------------------------------
// Localhost TCP backend.

namespace {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void shutdown_both() {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

    void write_all(const std::uint8_t* data, std::size_t n) {
        std::size_t sent = 0;
        while (sent < n) {
            const ssize_t k = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
            if (k <= 0) throw std::runtime_error("tcp send failed");
            sent += static_cast<std::size_t>(k);
        }
    }

    /// False on clean EOF at a frame boundary; throws mid-frame.
    bool read_exact(std::uint8_t* data, std::size_t n) {
        std::size_t got = 0;
        while (got < n) {
            const ssize_t k = ::recv(fd_, data + got, n - got, 0);
            if (k == 0) {
                if (got == 0) return false;
                throw std::runtime_error("tcp stream truncated mid-frame");
            }
            if (k < 0) throw std::runtime_error("tcp recv failed");
            got += static_cast<std::size_t>(k);
        }
        return true;
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

void send_message(Socket& sock, const Message& m) {
    const std::vector<std::uint8_t> bytes = encode(m);
    sock.write_all(bytes.data(), bytes.size());
}

/// Empty optional on clean EOF.
std::optional<Message> read_message(Socket& sock) {
    std::vector<std::uint8_t> buf(kFrameHeaderSize);
    if (!sock.read_exact(buf.data(), kFrameHeaderSize)) return std::nullopt;
    const std::size_t len = get_u32(buf.data() + 16);
    if (len > kMaxTcpPayload)
        throw std::runtime_error("tcp frame payload over the size cap");
    buf.resize(kFrameHeaderSize + len);
    if (len > 0 && !sock.read_exact(buf.data() + kFrameHeaderSize, len))
        throw std::runtime_error("tcp stream truncated mid-frame");
    Message m;
    const DecodeError err = decode(buf, m);
    if (err != DecodeError::None)
        throw std::runtime_error("tcp frame rejected: " + to_string(err));
    return m;
}

class TcpEndpoint final : public AgentEndpoint {
public:
    TcpEndpoint(Socket sock) : sock_(std::move(sock)) {}

    Message recv() override {
        auto m = read_message(sock_);
        if (!m) throw std::runtime_error("agent endpoint: connection closed");
        return *m;
    }

    void send(const Message& m) override { send_message(sock_, m); }

private:
    Socket sock_;
};

class TcpHub final : public ServerHub {
public:
    TcpHub(int n_agents, int port) : conns_(static_cast<std::size_t>(n_agents)) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw std::runtime_error("tcp listen socket failed");
        listen_ = Socket(fd);
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw std::runtime_error("tcp bind failed on port " +
                                     std::to_string(port));
        if (::listen(fd, n_agents) != 0)
            throw std::runtime_error("tcp listen failed");

        accept_thread_ = std::thread([this, n_agents] {
            try {
                for (int i = 0; i < n_agents; ++i) {
                    const int cfd = ::accept(listen_.fd(), nullptr, nullptr);
                    if (cfd < 0) throw std::runtime_error("tcp accept failed");
                    Socket conn(cfd);
                    const int one = 1;
                    ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
                    // Registration preamble: the connecting worker announces
                    // its agent id in two little-endian bytes.
                    std::uint8_t id_bytes[2];
                    if (!conn.read_exact(id_bytes, 2))
                        throw std::runtime_error("tcp registration failed");
                    const int id = get_u16(id_bytes);
                    if (id < 0 || id >= n_agents || conns_[id].sock.valid())
                        throw std::runtime_error("bad tcp agent registration");
                    conns_[id].sock = std::move(conn);
                    start_reader(id);
                }
                {
                    std::lock_guard lock(mu_);
                    ready_ = true;
                }
                cv_.notify_all();
            } catch (const std::exception& e) {
                std::lock_guard lock(mu_);
                accept_error_ = e.what();
                ready_ = true;
                cv_.notify_all();
            }
        });
    }

    ~TcpHub() override {
        listen_.shutdown_both();
        for (auto& c : conns_) c.sock.shutdown_both();
        if (accept_thread_.joinable()) accept_thread_.join();
        for (auto& c : conns_) {
            c.inbox.close();
            if (c.reader.joinable()) c.reader.join();
        }
    }

    int agent_count() const override { return static_cast<int>(conns_.size()); }

    void send_to(int agent, const Message& m) override {
        wait_ready();
        send_message(conns_[static_cast<std::size_t>(agent)].sock, m);
    }

    void broadcast(const Message& m) override {
        wait_ready();
        const std::vector<std::uint8_t> bytes = encode(m);
        for (auto& c : conns_) c.sock.write_all(bytes.data(), bytes.size());
    }

    std::vector<Message> collect(std::uint8_t kind, std::uint64_t round_id,
                                 int timeout_ms) override {
        wait_ready();
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(timeout_ms);
        std::vector<Message> replies;
        replies.reserve(conns_.size());
        for (std::size_t i = 0; i < conns_.size(); ++i) {
            auto m = conns_[i].inbox.pop(deadline);
            replies.push_back(
                expect_reply(std::move(m), static_cast<int>(i), kind, round_id));
        }
        return replies;
    }

private:
    struct Connection {
        Socket sock;
        MessageQueue inbox;
        std::thread reader;
    };

    void start_reader(int id) {
        Connection& c = conns_[static_cast<std::size_t>(id)];
        c.reader = std::thread([&c] {
            try {
                while (auto m = read_message(c.sock)) c.inbox.push(std::move(*m));
            } catch (const std::exception&) {
                // Connection died; pending collect() calls time out and name
                // this agent.
            }
            c.inbox.close();
        });
    }

    void wait_ready() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return ready_; });
        if (!accept_error_.empty())
            throw std::runtime_error("tcp hub setup failed: " + accept_error_);
    }

    Socket listen_;
    std::vector<Connection> conns_;
    std::thread accept_thread_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool ready_ = false;
    std::string accept_error_;
};

}  // namespace

std::unique_ptr<ServerHub> listen_tcp_hub(int n_agents, int port) {
    return std::make_unique<TcpHub>(n_agents, port);
}

std::unique_ptr<AgentEndpoint> connect_tcp_endpoint(int port, int agent_id) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));

    // The hub's accept loop starts asynchronously; retry with a fresh socket
    // until it is listening.
    for (int attempt = 0; attempt <= 200; ++attempt) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw std::runtime_error("tcp socket failed");
        Socket sock(fd);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            const std::uint8_t id_bytes[2] = {
                static_cast<std::uint8_t>(agent_id),
                static_cast<std::uint8_t>(agent_id >> 8)};
            sock.write_all(id_bytes, 2);
            return std::make_unique<TcpEndpoint>(std::move(sock));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    throw std::runtime_error("tcp connect failed on port " + std::to_string(port));
}

}  // namespace fedhql::wire

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedhql/types.hpp"

namespace fedhql::wire {

// ---------------------------------------------------------------------------
// Message schema.
//
// The schema is closed: these six bodies are the only things that can cross
// the server/agent boundary, and none of them can carry weight matrices,
// gradients, architecture descriptors or transition tuples. Replies echo the
// round_id (and state tag) of the request they answer.

enum class StateTag : std::uint8_t { Current = 0, Next = 1 };

struct SelfLearnSignal {
    std::uint64_t steps = 0;
    bool operator==(const SelfLearnSignal&) const = default;
};
struct QueryState {
    StateTag tag = StateTag::Current;
    std::vector<double> state;
    bool operator==(const QueryState&) const = default;
};
struct QValuesReply {
    StateTag tag = StateTag::Current;
    QVector q;
    bool operator==(const QValuesReply&) const = default;
};
struct FedTDTarget {
    std::vector<double> state;
    std::uint16_t action = 0;
    double target = 0.0;
    bool operator==(const FedTDTarget&) const = default;
};
struct ImproveAck {
    bool operator==(const ImproveAck&) const = default;
};
struct Shutdown {
    bool operator==(const Shutdown&) const = default;
};

using MessageBody = std::variant<SelfLearnSignal, QueryState, QValuesReply,
                                 FedTDTarget, ImproveAck, Shutdown>;

struct Message {
    std::uint64_t round_id = 0;
    std::uint16_t agent_id = 0;  // meaningful on replies only
    MessageBody body;
    bool operator==(const Message&) const = default;
};

/// Wire kind byte, by schema position.
std::uint8_t kind_of(const Message& m);
std::string kind_name(std::uint8_t kind);

inline constexpr std::uint8_t kKindSelfLearnSignal = 0;
inline constexpr std::uint8_t kKindQueryState = 1;
inline constexpr std::uint8_t kKindQValuesReply = 2;
inline constexpr std::uint8_t kKindFedTDTarget = 3;
inline constexpr std::uint8_t kKindImproveAck = 4;
inline constexpr std::uint8_t kKindShutdown = 5;

// ---------------------------------------------------------------------------
// Frame codec.
//
// Layout (little-endian throughout):
//   magic   4 bytes  "FHQL"
//   version 1 byte   (= 1)
//   kind    1 byte
//   round   8 bytes  unsigned
//   agent   2 bytes  unsigned
//   length  4 bytes  unsigned payload byte count
//   payload length bytes; reals are IEEE-754 binary64 little-endian
//
// Payloads:
//   SelfLearnSignal  u64 steps
//   QueryState       u8 tag, then f64 state components
//   QValuesReply     u8 tag, then f64 action values
//   FedTDTarget      f64 state components, u16 action, f64 target
//   ImproveAck       empty
//   Shutdown         empty

inline constexpr std::size_t kFrameHeaderSize = 20;
inline constexpr std::uint8_t kWireVersion = 1;

enum class DecodeError {
    None,
    BadMagic,
    BadVersion,
    UnknownKind,
    LengthMismatch,
    TruncatedFrame,
};
std::string to_string(DecodeError e);

/// Serializes one message to a frame. Deterministic. Throws
/// std::length_error on a payload over 2^32 - 1 bytes.
std::vector<std::uint8_t> encode(const Message& m);

/// Parses exactly one frame from the front of `bytes`. On success stores
/// the byte count consumed in `consumed` (when non-null); trailing bytes are
/// the caller's concern. Never throws on malformed input.
DecodeError decode(const std::vector<std::uint8_t>& bytes, Message& out,
                   std::size_t* consumed = nullptr);

// ---------------------------------------------------------------------------
// Channels.

/// A federation round failed because one agent did not reply in time (or
/// its connection dropped).
class RoundAborted : public std::runtime_error {
public:
    RoundAborted(int agent_id, const std::string& what)
        : std::runtime_error(what), agent_id_(agent_id) {}
    int agent_id() const { return agent_id_; }

private:
    int agent_id_;
};

/// Agent-side endpoint of a duplex, ordered-reliable message stream.
class AgentEndpoint {
public:
    virtual ~AgentEndpoint() = default;
    /// Blocks until the next server message arrives.
    virtual Message recv() = 0;
    virtual void send(const Message& m) = 0;
};

/// Server-side hub over the N agent connections. Delivery is exactly-once
/// and per-connection FIFO in both directions. Rounds are synchronous:
/// collect() waits for all N agents and aborts naming the offender on
/// timeout.
class ServerHub {
public:
    virtual ~ServerHub() = default;
    virtual int agent_count() const = 0;
    virtual void send_to(int agent, const Message& m) = 0;
    virtual void broadcast(const Message& m) = 0;
    /// One reply per agent, indexed by agent id, each matching `kind` and
    /// `round_id`. Throws RoundAborted on per-agent timeout.
    virtual std::vector<Message> collect(std::uint8_t kind,
                                         std::uint64_t round_id,
                                         int timeout_ms) = 0;
};

/// Matched in-process hub + endpoints backed by lock-protected queues.
struct InprocTransport {
    std::unique_ptr<ServerHub> hub;
    std::vector<std::unique_ptr<AgentEndpoint>> endpoints;
};
InprocTransport make_inproc_transport(int n_agents);

/// Localhost TCP variant with identical semantics: the hub listens on
/// `port`, each endpoint owns one connection and registers its agent id in
/// a two-byte preamble, so workers may connect in any order.
std::unique_ptr<ServerHub> listen_tcp_hub(int n_agents, int port);
std::unique_ptr<AgentEndpoint> connect_tcp_endpoint(int port, int agent_id);

}  // namespace fedhql::wire

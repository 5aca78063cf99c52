#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace codeepneat {

using json = nlohmann::json;

// Frames are a 4-byte big-endian payload length followed by UTF-8 JSON.
// Message objects carry a "type" of REGISTER, JOB, REPORT, HEARTBEAT or
// SHUTDOWN.
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_frame(std::string_view payload);
std::string encode_message(const json& message);

// Extracts one complete frame from the front of buffer. Returns nullopt when
// more bytes are needed; throws ProtocolError on an oversized length.
std::optional<std::string> take_frame(std::string& buffer);

// Blocking socket I/O. send_frame returns false once the peer is gone;
// read_frame returns nullopt on orderly EOF or a reset connection.
bool send_frame(int fd, std::string_view payload);
bool send_message(int fd, const json& message);
std::optional<std::string> read_frame(int fd);

namespace message {
json register_worker(const std::string& worker_id, const json& capabilities);
json job(std::uint64_t job_id, int attempt, const json& network, const json& budget,
         const json& evaluator);
json report(std::uint64_t job_id, const json& report);
json error(const json& job_id, const std::string& what);
json heartbeat();
json shutdown();
}  // namespace message

}  // namespace codeepneat

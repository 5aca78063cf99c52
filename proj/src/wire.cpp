#include "codeepneat/wire.hpp"

#include <cerrno>
#include <sys/socket.h>
#include <unistd.h>

namespace codeepneat {

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame exceeds the size limit");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

std::string encode_message(const json& message) { return encode_frame(message.dump()); }

std::optional<std::string> take_frame(std::string& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  const auto byte = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[i])); };
  const std::uint32_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
  if (n > kMaxFrameBytes) throw ProtocolError("incoming frame exceeds the size limit");
  if (buffer.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer.substr(4, n);
  buffer.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

bool send_frame(int fd, std::string_view payload) {
  const std::string frame = encode_frame(payload);
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t n = ::send(fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool send_message(int fd, const json& message) { return send_frame(fd, message.dump()); }

namespace {

bool read_exact(int fd, char* data, std::size_t size) {
  std::size_t got = 0;
  while (got < size) {
    const ssize_t n = ::recv(fd, data + got, size - got, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

std::optional<std::string> read_frame(int fd) {
  unsigned char header[4];
  if (!read_exact(fd, reinterpret_cast<char*>(header), 4)) return std::nullopt;
  const std::uint32_t n = (static_cast<std::uint32_t>(header[0]) << 24) |
                          (static_cast<std::uint32_t>(header[1]) << 16) |
                          (static_cast<std::uint32_t>(header[2]) << 8) | header[3];
  if (n > kMaxFrameBytes) throw ProtocolError("incoming frame exceeds the size limit");
  std::string payload(n, '\0');
  if (n > 0 && !read_exact(fd, payload.data(), n)) return std::nullopt;
  return payload;
}

namespace message {

json register_worker(const std::string& worker_id, const json& capabilities) {
  return {{"type", "REGISTER"}, {"worker_id", worker_id}, {"capabilities", capabilities}};
}

json job(std::uint64_t job_id, int attempt, const json& network, const json& budget,
         const json& evaluator) {
  return {{"type", "JOB"},       {"job_id", job_id}, {"attempt", attempt},
          {"network", network}, {"budget", budget}, {"evaluator", evaluator}};
}

json report(std::uint64_t job_id, const json& report) {
  return {{"type", "REPORT"}, {"job_id", job_id}, {"report", report}};
}

json error(const json& job_id, const std::string& what) {
  return {{"type", "REPORT"}, {"job_id", job_id}, {"error", what}};
}

json heartbeat() { return {{"type", "HEARTBEAT"}}; }

json shutdown() { return {{"type", "SHUTDOWN"}}; }

}  // namespace message

}  // namespace codeepneat

// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <stdexcept>

#include <httplib.h>

#include "cv/demo.hpp"

namespace cv::demo {
namespace {

std::string percent_decode(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '+') {
      out += ' ';
    } else if (text[i] == '%' && i + 2 < text.size()) {
      unsigned value = 0;
      const auto res = std::from_chars(text.data() + i + 1, text.data() + i + 3, value, 16);
      if (res.ec == std::errc() && res.ptr == text.data() + i + 3) {
        out += static_cast<char>(value);
        i += 2;
      } else {
        out += '%';
      }
    } else {
      out += text[i];
    }
  }
  return out;
}

const char* reason(int status) {
  switch (status) {
    case 200:
      return "OK";
    case 400:
      return "Bad Request";
    case 404:
      return "Not Found";
    case 405:
      return "Method Not Allowed";
    default:
      return "Internal Server Error";
  }
}

}  // namespace

std::optional<Request> parse_request(std::string_view head) {
  const auto eol = head.find("\r\n");
  const std::string_view line = head.substr(0, eol);
  const auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos || sp1 == 0) return std::nullopt;
  const auto sp2 = line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos || sp2 == sp1 + 1) return std::nullopt;
  if (line.substr(sp2 + 1).rfind("HTTP/1.", 0) != 0) return std::nullopt;

  Request req;
  req.method = std::string(line.substr(0, sp1));
  const std::string_view target = line.substr(sp1 + 1, sp2 - sp1 - 1);
  const auto q = target.find('?');
  req.path = percent_decode(target.substr(0, q));
  if (q != std::string_view::npos) {
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
      const auto amp = rest.find('&');
      const std::string_view pair = rest.substr(0, amp);
      const auto eq = pair.find('=');
      if (!pair.empty()) {
        req.query[percent_decode(pair.substr(0, eq))] =
            eq == std::string_view::npos ? std::string() : percent_decode(pair.substr(eq + 1));
      }
      if (amp == std::string_view::npos) break;
      rest = rest.substr(amp + 1);
    }
  }
  return req;
}

std::string make_response(int status, std::string_view content_type, std::string_view body) {
  std::string out = "HTTP/1.0 " + std::to_string(status) + " " + reason(status) + "\r\n";
  out += "Content-Type: " + std::string(content_type) + "\r\n";
  out += "Content-Length: " + std::to_string(body.size()) + "\r\n";
  out += "Connection: close\r\n\r\n";
  out += body;
  return out;
}

HttpResult http_get(const std::string& host, int port, const std::string& target, std::chrono::milliseconds timeout) {
  httplib::Client client(host, port);
  client.set_keep_alive(false);
  const auto sec = static_cast<time_t>(timeout.count() / 1000);
  const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  HttpResult result;
  const auto start = std::chrono::steady_clock::now();
  auto res = client.Get(target);
  if (res) {
    result.outcome = HttpResult::Outcome::ok;
    result.status = res->status;
    result.body = std::move(res->body);
    return result;
  }
  switch (res.error()) {
    case httplib::Error::Connection:
      result.outcome = HttpResult::Outcome::connect_error;
      break;
    case httplib::Error::ConnectionTimeout:
      result.outcome = HttpResult::Outcome::timeout;
      break;
    default:
      result.outcome = std::chrono::steady_clock::now() - start >= timeout ? HttpResult::Outcome::timeout
                                                                             : HttpResult::Outcome::bad_reply;
  }
  return result;
}

std::pair<std::string, int> split_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw std::invalid_argument("expected host:port, got '" + text + "'");
  int port = 0;
  const char* first = text.data() + colon + 1;
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, port);
  if (res.ec != std::errc() || res.ptr != last || port < 0 || port > 65535) {
    throw std::invalid_argument("bad port in '" + text + "'");
  }
  return {text.substr(0, colon), port};
}

std::optional<std::string> element_text(const std::string& page, const std::string& id) {
  const std::string marker = "id=\"" + id + "\">";
  const auto pos = page.find(marker);
  if (pos == std::string::npos) return std::nullopt;
  const auto start = pos + marker.size();
  const auto end = page.find('<', start);
  if (end == std::string::npos) return std::nullopt;
  std::string text = page.substr(start, end - start);
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    static const std::pair<const char*, char> entities[] = {
        {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}};
    bool replaced = false;
    for (const auto& [name, ch] : entities) {
      if (text.compare(i, std::strlen(name), name) == 0) {
        out += ch;
        i += std::strlen(name) - 1;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += '&';
  }
  return out;
}

}  // namespace cv::demo

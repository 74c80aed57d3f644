#pragma once

// Minimal JSON writer with the two guarantees the report format needs and a
// generic library would not pin down: object keys stay in insertion order,
// and doubles render as shortest-17-significant-digit decimals via "%.17g",
// so repeated runs emit byte-identical documents.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace sspa {

class JsonWriter {
public:
  explicit JsonWriter(bool pretty = true) : pretty_(pretty) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    separate();
    append_string(k);
    out_ += pretty_ ? ": " : ":";
    pending_value_ = true;
    return *this;
  }

  JsonWriter& value(const std::string& s) {
    separate();
    append_string(s);
    return *this;
  }
  JsonWriter& value(const char* s) { return value(std::string(s)); }

  JsonWriter& value(double v) {
    separate();
    if (!std::isfinite(v)) {
      out_ += "null";
      return *this;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out_ += buf;
    return *this;
  }

  JsonWriter& value(long long v) {
    separate();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%" PRId64, static_cast<int64_t>(v));
    out_ += buf;
    return *this;
  }
  JsonWriter& value(int v) { return value(static_cast<long long>(v)); }
  JsonWriter& value(std::size_t v) { return value(static_cast<long long>(v)); }

  JsonWriter& value(bool v) {
    separate();
    out_ += v ? "true" : "false";
    return *this;
  }

  JsonWriter& null() {
    separate();
    out_ += "null";
    return *this;
  }

  const std::string& str() const { return out_; }

private:
  JsonWriter& open(char c) {
    separate();
    out_ += c;
    stack_.push_back(false);
    return *this;
  }

  JsonWriter& close(char c) {
    const bool had_items = stack_.back();
    stack_.pop_back();
    if (pretty_ && had_items) {
      out_ += '\n';
      out_.append(2 * stack_.size(), ' ');
    }
    out_ += c;
    return *this;
  }

  // Comma/newline bookkeeping before any key or value.
  void separate() {
    if (pending_value_) { // value directly after its key
      pending_value_ = false;
      return;
    }
    if (stack_.empty()) return;
    if (stack_.back()) out_ += ',';
    stack_.back() = true;
    if (pretty_) {
      out_ += '\n';
      out_.append(2 * stack_.size(), ' ');
    }
  }

  void append_string(const std::string& s) {
    out_ += '"';
    for (unsigned char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        case '\b': out_ += "\\b"; break;
        case '\f': out_ += "\\f"; break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += static_cast<char>(c);
          }
      }
    }
    out_ += '"';
  }

  bool pretty_;
  bool pending_value_ = false;
  std::string out_;
  std::vector<bool> stack_; // per open container: has it emitted an item yet
};

} // namespace sspa

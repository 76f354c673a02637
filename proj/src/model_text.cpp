// Copyright 2026 The RepBNN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "repbnn/error.h"
#include "repbnn/graph.h"

namespace repbnn {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '-';
}

struct Token {
  std::string text;
  std::size_t col = 0;
};

// Reads one line of the model format. Columns are 1-based.
class LineCursor {
 public:
  LineCursor(std::string_view line, std::size_t line_no)
      : line_(line), line_no_(line_no) {}

  [[noreturn]] void fail(const std::string& what, std::size_t col = 0) const {
    std::ostringstream os;
    os << "line " << line_no_ << ", column " << (col ? col : pos_ + 1) << ": "
       << what;
    throw Error(ErrorCode::kParseError, os.str());
  }

  void skip_ws() {
    while (pos_ < line_.size() &&
           std::isspace(static_cast<unsigned char>(line_[pos_]))) {
      ++pos_;
    }
  }
  bool at_end() {
    skip_ws();
    return pos_ >= line_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < line_.size() ? line_[pos_] : '\0';
  }
  bool consume(std::string_view s) {
    skip_ws();
    if (line_.substr(pos_, s.size()) == s) {
      pos_ += s.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view s) {
    if (!consume(s)) fail("expected '" + std::string(s) + "'");
  }
  Token ident() {
    skip_ws();
    Token t{"", pos_ + 1};
    if (pos_ >= line_.size() || !is_ident_start(line_[pos_])) {
      fail("expected identifier");
    }
    while (pos_ < line_.size() && is_ident_char(line_[pos_])) {
      t.text.push_back(line_[pos_++]);
    }
    return t;
  }
  // Integer or identifier.
  Token value() {
    skip_ws();
    Token t{"", pos_ + 1};
    while (pos_ < line_.size() && is_ident_char(line_[pos_])) {
      t.text.push_back(line_[pos_++]);
    }
    if (t.text.empty()) fail("expected value");
    return t;
  }

  std::size_t parse_uint(const Token& t) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || ptr != t.text.data() + t.text.size()) {
      fail("expected non-negative integer, got '" + t.text + "'", t.col);
    }
    return v;
  }

 private:
  std::string_view line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

class AttrReader {
 public:
  AttrReader(LineCursor& cur, std::map<std::string, Token> attrs, Token kind)
      : cur_(cur), attrs_(std::move(attrs)), kind_(std::move(kind)) {}

  std::size_t uint(const std::string& key) {
    auto it = attrs_.find(key);
    if (it == attrs_.end()) {
      cur_.fail(kind_.text + " requires attribute '" + key + "'", kind_.col);
    }
    const std::size_t v = cur_.parse_uint(it->second);
    attrs_.erase(it);
    return v;
  }
  std::size_t uint_or(const std::string& key, std::size_t fallback) {
    return attrs_.contains(key) ? uint(key) : fallback;
  }
  std::string text_or(const std::string& key, std::string fallback) {
    auto it = attrs_.find(key);
    if (it == attrs_.end()) return fallback;
    std::string v = it->second.text;
    attrs_.erase(it);
    return v;
  }
  void finish() {
    if (!attrs_.empty()) {
      const auto& [key, tok] = *attrs_.begin();
      cur_.fail("unknown attribute '" + key + "' for " + kind_.text, tok.col);
    }
  }

 private:
  LineCursor& cur_;
  std::map<std::string, Token> attrs_;
  Token kind_;
};

NodeAttrs read_attrs(NodeKind kind, AttrReader& r) {
  switch (kind) {
    case NodeKind::kInput:
      return InputAttrs{r.uint("c"), r.uint("h"), r.uint("w")};
    case NodeKind::kConv:
    case NodeKind::kBconv:
    case NodeKind::kRepConv:
    case NodeKind::kRepBconv: {
      ConvSpec s;
      s.c_in = r.uint("c_in");
      s.c_out = r.uint("c_out");
      s.kh = r.uint("kh");
      s.kw = r.uint("kw");
      s.stride = r.uint_or("stride", 1);
      s.padding = r.uint_or("pad", 0);
      s.beta = is_rep_conv_kind(kind) ? r.uint("beta") : 1;
      s.binary = is_binary_conv_kind(kind);
      return s;
    }
    case NodeKind::kBatchNorm:
      return BatchNormAttrs{r.uint("channels"), r.uint_or("share", 1)};
    case NodeKind::kPReLUShifted:
      return ChannelAttrs{r.uint("channels")};
    case NodeKind::kAvgPool:
    case NodeKind::kMaxPool: {
      PoolAttrs p;
      p.global = r.uint_or("global", 0) != 0;
      if (!p.global) {
        p.kernel = r.uint("k");
        p.stride = r.uint_or("stride", p.kernel);
      }
      return p;
    }
    case NodeKind::kRepeat:
      return RepeatAttrs{r.uint("times"), r.text_or("origin", "")};
    case NodeKind::kFC: {
      FCAttrs a;
      a.in_features = r.uint("in");
      a.out_features = r.uint("out");
      a.take = r.uint_or("take", a.in_features);
      return a;
    }
    case NodeKind::kChannelPad:
      return ChannelPadAttrs{r.uint("before"), r.uint("after")};
    default:
      return NoAttrs{};
  }
}

std::string attrs_text(const Node& n) {
  std::ostringstream os;
  switch (n.kind) {
    case NodeKind::kInput: {
      const auto& a = n.as<InputAttrs>();
      os << "c=" << a.c << ", h=" << a.h << ", w=" << a.w;
      break;
    }
    case NodeKind::kConv:
    case NodeKind::kBconv:
    case NodeKind::kRepConv:
    case NodeKind::kRepBconv: {
      const ConvSpec& s = n.conv();
      os << "c_in=" << s.c_in << ", c_out=" << s.c_out << ", kh=" << s.kh
         << ", kw=" << s.kw << ", stride=" << s.stride << ", pad=" << s.padding;
      if (is_rep_conv_kind(n.kind)) os << ", beta=" << s.beta;
      break;
    }
    case NodeKind::kBatchNorm: {
      const auto& a = n.as<BatchNormAttrs>();
      os << "channels=" << a.channels << ", share=" << a.share;
      break;
    }
    case NodeKind::kPReLUShifted:
      os << "channels=" << n.as<ChannelAttrs>().channels;
      break;
    case NodeKind::kAvgPool:
    case NodeKind::kMaxPool: {
      const auto& p = n.as<PoolAttrs>();
      if (p.global) {
        os << "global=1";
      } else {
        os << "k=" << p.kernel << ", stride=" << p.stride;
      }
      break;
    }
    case NodeKind::kRepeat: {
      const auto& a = n.as<RepeatAttrs>();
      os << "times=" << a.times;
      if (!a.origin.empty()) os << ", origin=" << a.origin;
      break;
    }
    case NodeKind::kFC: {
      const auto& a = n.as<FCAttrs>();
      os << "in=" << a.in_features << ", out=" << a.out_features
         << ", take=" << a.take;
      break;
    }
    case NodeKind::kChannelPad: {
      const auto& a = n.as<ChannelPadAttrs>();
      os << "before=" << a.before << ", after=" << a.after;
      break;
    }
    default:
      break;
  }
  return os.str();
}

}  // namespace

std::string emit_model(const Graph& g) {
  validate(g);
  std::ostringstream os;
  os << "name=" << g.name << '\n';
  os << "beta=" << g.beta << '\n';
  os << "transformed=" << (g.transformed ? 1 : 0) << '\n';
  if (!g.outputs.empty()) {
    os << "outputs=";
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      os << (i ? "," : "") << g.outputs[i];
    }
    os << '\n';
  }
  for (const Node& n : g.nodes()) {
    os << n.id << ": " << kind_name(n.kind) << '(' << attrs_text(n) << ')';
    if (!n.inputs.empty()) {
      os << " <- ";
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        os << (i ? ", " : "") << n.inputs[i];
      }
    }
    os << '\n';
  }
  return os.str();
}

Graph parse_model(std::string_view text) {
  Graph g;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    LineCursor cur(line, line_no);
    if (cur.at_end()) {
      if (end == text.size()) break;
      continue;
    }

    const Token head = cur.ident();
    if (cur.consume("=")) {
      if (head.text == "name") {
        g.name = cur.value().text;
      } else if (head.text == "beta") {
        g.beta = cur.parse_uint(cur.value());
      } else if (head.text == "transformed") {
        g.transformed = cur.parse_uint(cur.value()) != 0;
      } else if (head.text == "outputs") {
        g.outputs.push_back(cur.ident().text);
        while (cur.consume(",")) g.outputs.push_back(cur.ident().text);
      } else {
        cur.fail("unknown header '" + head.text + "'", head.col);
      }
    } else {
      cur.expect(":");
      const Token kind_tok = cur.ident();
      const auto kind = kind_from_name(kind_tok.text);
      if (!kind) cur.fail("unknown node kind '" + kind_tok.text + "'", kind_tok.col);
      cur.expect("(");
      std::map<std::string, Token> attrs;
      if (!cur.consume(")")) {
        do {
          const Token key = cur.ident();
          cur.expect("=");
          Token val = cur.value();
          if (!attrs.emplace(key.text, std::move(val)).second) {
            cur.fail("duplicate attribute '" + key.text + "'", key.col);
          }
        } while (cur.consume(","));
        cur.expect(")");
      }
      AttrReader reader(cur, std::move(attrs), kind_tok);
      Node node{head.text, *kind, read_attrs(*kind, reader), {}};
      reader.finish();
      if (cur.consume("<-")) {
        node.inputs.push_back(cur.ident().text);
        while (cur.consume(",")) node.inputs.push_back(cur.ident().text);
      }
      if (g.contains(node.id)) cur.fail("duplicate node id '" + node.id + "'", head.col);
      g.add(std::move(node));
    }
    if (!cur.at_end()) cur.fail("unexpected trailing text");
    if (end == text.size()) break;
  }
  validate(g);
  return g;
}

Graph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

void save_model(const std::string& path, const Graph& g) {
  const std::string text = emit_model(g);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

}  // namespace repbnn

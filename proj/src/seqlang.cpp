#include "nvdnp/seqlang.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp::seq {
namespace {

constexpr int kMaxRepeat = 1'000'000;

enum class Tok { kIdent, kNumber, kLParen, kRParen, kComma, kLBrace, kRBrace, kArrow, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string_view text;
  int line = 1;
  int column = 1;
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::kIdent: return "identifier";
    case Tok::kNumber: return "number";
    case Tok::kLParen: return "'('";
    case Tok::kRParen: return "')'";
    case Tok::kComma: return "','";
    case Tok::kLBrace: return "'{'";
    case Tok::kRBrace: return "'}'";
    case Tok::kArrow: return "'->'";
    case Tok::kEnd: return "end of input";
  }
  return "?";
}

std::string shown(const Token& t) {
  if (t.kind == Tok::kEnd) return "end of input";
  return fmt::format("'{}'", t.text);
}

[[noreturn]] void syntax(const Token& at, const std::string& msg) {
  throw ParseError(ErrorKind::kSyntax, at.line, at.column, msg);
}
[[noreturn]] void semantic(const Token& at, const std::string& msg) {
  throw ParseError(ErrorKind::kSemantic, at.line, at.column, msg);
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    const std::size_t start = i;
    std::size_t len = 1;
    if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
      t.kind = Tok::kArrow;
      len = 2;
    } else if (is_digit(c) || ((c == '-' || c == '+' || c == '.') && i + 1 < src.size() &&
                               (is_digit(src[i + 1]) || (src[i + 1] == '.' && c != '.')))) {
      std::size_t j = i + 1;
      while (j < src.size() && (is_digit(src[j]) || src[j] == '.')) ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && is_digit(src[k])) {
          j = k;
          while (j < src.size() && is_digit(src[j])) ++j;
        }
      }
      t.kind = Tok::kNumber;
      len = j - i;
    } else if (is_ident_start(c)) {
      std::size_t j = i + 1;
      while (j < src.size() && is_ident_char(src[j])) ++j;
      t.kind = Tok::kIdent;
      len = j - i;
    } else {
      switch (c) {
        case '(': t.kind = Tok::kLParen; break;
        case ')': t.kind = Tok::kRParen; break;
        case ',': t.kind = Tok::kComma; break;
        case '{': t.kind = Tok::kLBrace; break;
        case '}': t.kind = Tok::kRBrace; break;
        default:
          throw ParseError(ErrorKind::kSyntax, line, col, fmt::format("unexpected character '{}'", c));
      }
    }
    t.text = src.substr(start, len);
    advance(len);
    out.push_back(t);
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options) : tokens_(lex(text)), options_(options) {}

  ProtocolProgram program() {
    const Token first = peek();
    std::vector<Statement> body;
    while (peek().kind != Tok::kEnd) body.push_back(statement());
    if (body.empty()) semantic(first, "program has no statements");
    try {
      return ProtocolProgram(std::move(body));
    } catch (const std::exception& e) {
      semantic(first, e.what());
    }
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  Token expect(Tok kind, const char* context) {
    const Token t = take();
    if (t.kind != kind) syntax(t, fmt::format("expected {} {}, found {}", tok_name(kind), context, shown(t)));
    return t;
  }

  Token expect_word(std::string_view word, const char* context) {
    const Token t = take();
    if (t.kind != Tok::kIdent || t.text != word) {
      syntax(t, fmt::format("expected '{}' {}, found {}", word, context, shown(t)));
    }
    return t;
  }

  bool accept_word(std::string_view word) {
    if (peek().kind == Tok::kIdent && peek().text == word) {
      ++pos_;
      return true;
    }
    return false;
  }

  double number(const char* context) {
    const Token t = expect(Tok::kNumber, context);
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) syntax(t, fmt::format("malformed number '{}'", t.text));
    if (!std::isfinite(v)) semantic(t, fmt::format("number '{}' is out of range", t.text));
    return v;
  }

  int integer(const char* context) {
    const Token t = peek();
    const double v = number(context);
    if (v != std::floor(v) || t.text.find_first_of(".eE") != std::string_view::npos) {
      semantic(t, fmt::format("expected an integer {}, found '{}'", context, t.text));
    }
    if (std::abs(v) > std::numeric_limits<int>::max()) semantic(t, fmt::format("integer '{}' is out of range", t.text));
    return static_cast<int>(v);
  }

  Statement statement() {
    const Token head = take();
    if (head.kind != Tok::kIdent) syntax(head, fmt::format("expected a statement, found {}", shown(head)));
    if (head.text == "mw") return pulse(head, Channel::kMw);
    if (head.text == "rf") return pulse(head, Channel::kRf);
    if (head.text == "laser") return laser(head);
    if (head.text == "repeat") return repeat(head);
    if (head.text == "readout") {
      const Token label = expect(Tok::kIdent, "after 'readout'");
      return Statement{ReadoutMarker{std::string(label.text)}};
    }
    syntax(head, fmt::format("unknown statement '{}'", head.text));
  }

  SpinLevel level() {
    expect(Tok::kLParen, "to open a level");
    const Token ms_tok = peek();
    const int ms = integer("for m_S");
    expect(Tok::kComma, "between m_S and m_I");
    const Token mi_tok = peek();
    const int mi = integer("for m_I");
    expect(Tok::kRParen, "to close a level");
    if (ms < -1 || ms > 1) semantic(ms_tok, fmt::format("m_S must be -1, 0 or 1, got {}", ms));
    if (mi < -1 || mi > 1) semantic(mi_tok, fmt::format("m_I must be -1, 0 or 1, got {}", mi));
    return {ms, mi};
  }

  Statement pulse(const Token& head, Channel channel) {
    DriveSpec d;
    const Token from_tok = peek();
    d.transition.channel = channel;
    d.transition.from = level();
    expect(Tok::kArrow, "between levels");
    d.transition.to = level();
    if (!d.transition.is_valid()) {
      try {
        d.transition.validate();
      } catch (const std::exception& e) {
        semantic(from_tok, e.what());
      }
      semantic(from_tok, "invalid transition");
    }

    const Token angle_tok = peek();
    const double value = number("for the rotation angle");
    const Token unit = take();
    if (unit.kind == Tok::kIdent && unit.text == "pi") {
      d.nominal_angle = Angle::from_pi(value);
    } else if (unit.kind == Tok::kIdent && unit.text == "rad") {
      d.nominal_angle = Angle::from_radians(value);
    } else {
      syntax(unit, fmt::format("expected 'pi' or 'rad' after the angle, found {}", shown(unit)));
    }

    std::optional<Token> offset_tok;
    if (accept_word("rabi")) {
      const Token rabi_tok = peek();
      d.rabi_frequency_mhz = number("for the Rabi frequency");
      expect_word("MHz", "after the Rabi frequency");
      if (!(d.rabi_frequency_mhz > 0.0)) semantic(rabi_tok, "Rabi frequency must be > 0 MHz");
      d.selectivity = Selectivity::kRabi;
    }
    if (peek().kind == Tok::kIdent && peek().text == "offset") {
      offset_tok = take();
      d.carrier_offset_mhz = number("for the carrier offset");
      expect_word("MHz", "after the carrier offset");
      if (d.selectivity != Selectivity::kRabi) semantic(*offset_tok, "'offset' needs a 'rabi' clause before it");
    }
    try {
      d.validate();
    } catch (const std::exception& e) {
      semantic(angle_tok, e.what());
    }
    (void)head;
    return Statement{d};
  }

  Statement laser(const Token& head) {
    const Token dur_tok = peek();
    double duration = number("for the laser duration");
    const Token unit = take();
    if (unit.kind == Tok::kIdent && unit.text == "us") {
    } else if (unit.kind == Tok::kIdent && unit.text == "ns") {
      duration /= 1000.0;
    } else {
      syntax(unit, fmt::format("expected 'ns' or 'us' after the laser duration, found {}", shown(unit)));
    }
    if (duration < 0.0) semantic(dur_tok, "laser duration must be >= 0");
    OpticalParams optics = options_.laser_calibration;
    optics.pump_duration_us = duration;
    if (accept_word("walk")) {
      optics.nuclear_model = NuclearModel::kRandomWalk;
    } else if (accept_word("flip")) {
      optics.nuclear_model = NuclearModel::kSingleFlip;
    } else if (accept_word("hold")) {
      optics.nuclear_model = NuclearModel::kHold;
    }
    try {
      optics.validate();
    } catch (const std::exception& e) {
      semantic(head, e.what());
    }
    return Statement{LaserPulse{optics}};
  }

  Statement repeat(const Token& head) {
    const Token count_tok = peek();
    const int count = integer("for the repeat count");
    if (count < 1 || count > kMaxRepeat) {
      semantic(count_tok, fmt::format("repeat count must lie in [1, {}], got {}", kMaxRepeat, count));
    }
    const Token open = expect(Tok::kLBrace, "to open the repeat body");
    RepeatBlock block;
    block.count = count;
    while (peek().kind != Tok::kRBrace) {
      if (peek().kind == Tok::kEnd) syntax(peek(), fmt::format("unterminated repeat block opened at {}:{}", open.line, open.column));
      block.body.push_back(statement());
    }
    take();
    if (block.body.empty()) semantic(head, "repeat body is empty");
    return Statement{std::move(block)};
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const ParseOptions& options_;
};

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string fmt_level(const SpinLevel& l) { return fmt::format("({}, {})", l.ms, l.mi); }

void emit(const std::vector<Statement>& body, int depth, std::string& out);

void emit_one(const Statement& s, int depth, std::string& out) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  if (const auto* d = std::get_if<DriveSpec>(&s.node)) {
    out += fmt::format("{}{} {} -> {} {}pi", indent, d->transition.channel == Channel::kMw ? "mw" : "rf",
                       fmt_level(d->transition.from), fmt_level(d->transition.to),
                       fmt_double(d->nominal_angle.pi_multiple()));
    if (d->selectivity == Selectivity::kRabi) {
      out += fmt::format(" rabi {} MHz", fmt_double(d->rabi_frequency_mhz));
      if (d->carrier_offset_mhz != 0.0) out += fmt::format(" offset {} MHz", fmt_double(d->carrier_offset_mhz));
    }
    out += '\n';
  } else if (const auto* l = std::get_if<LaserPulse>(&s.node)) {
    out += fmt::format("{}laser {} us {}\n", indent, fmt_double(l->optics.pump_duration_us),
                       to_string(l->optics.nuclear_model));
  } else if (const auto* m = std::get_if<ReadoutMarker>(&s.node)) {
    out += fmt::format("{}readout {}\n", indent, m->label);
  } else {
    const auto& r = std::get<RepeatBlock>(s.node);
    out += fmt::format("{}repeat {} {{\n", indent, r.count);
    emit(r.body, depth + 1, out);
    out += indent + "}\n";
  }
}

void emit(const std::vector<Statement>& body, int depth, std::string& out) {
  for (const Statement& s : body) emit_one(s, depth, out);
}

}  // namespace

ParseError::ParseError(ErrorKind kind, int line, int column, const std::string& message)
    : std::runtime_error(fmt::format("{}:{}: {} error: {}", line, column,
                                     kind == ErrorKind::kSyntax ? "syntax" : "semantic", message)),
      kind_(kind),
      line_(line),
      column_(column),
      detail_(message) {}

ProtocolProgram parse_program(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).program();
}

std::string format_program(const ProtocolProgram& program) {
  std::string out;
  if (program.repeat_count() > 1) {
    out += fmt::format("repeat {} {{\n", program.repeat_count());
    emit(program.body(), 1, out);
    out += "}\n";
  } else {
    emit(program.body(), 0, out);
  }
  return out;
}

}  // namespace nvdnp::seq

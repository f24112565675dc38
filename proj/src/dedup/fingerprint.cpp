#include "scopeweaver/dedup/fingerprint.hpp"

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/syntax/tokenizer.hpp"

namespace scopeweaver::dedup {

using syntax::TokenKind;

std::string normalize_lines(std::string_view source) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto nl = source.find('\n', pos);
    if (nl == std::string_view::npos)
      nl = source.size();
    auto line = source.substr(pos, nl - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t' ||
                             line.back() == '\f'))
      line.remove_suffix(1);
    if (!line.empty()) {
      out.append(line);
      out.push_back('\n');
    }
    pos = nl + 1;
  }
  return out;
}

std::string normalize(std::string_view source) {
  syntax::TokenStream ts;
  try {
    ts = syntax::tokenize(source);
  } catch (const Error &) {
    return normalize_lines(source);
  }
  std::string out;
  for (const auto &t : ts.tokens) {
    switch (t.kind) {
    case TokenKind::Comment:
      continue;
    case TokenKind::Newline:
    case TokenKind::Indent:
    case TokenKind::Dedent:
    case TokenKind::EndMarker:
      out.append(syntax::to_string(t.kind));
      break;
    default:
      out.append(syntax::to_string(t.kind));
      out.push_back(' ');
      out.append(t.text(source));
    }
    out.push_back('\0');
  }
  return out;
}

std::string fingerprint(std::string_view source) { return md5_hex(normalize(source)); }

} // namespace scopeweaver::dedup

// Test double for the sandbox runner. Verdicts come from markers in the
// module text instead of executing it:
//   "(:"                 compile SyntaxError, no import stage
//   "undefined"          import NameError
//   "import nonexistent" import ModuleNotFoundError
//   "while True"         never answers
//   "CRASH"              exits without answering
//   "GARBAGE"            answers with a non-JSON line
//   "WRONGID"            answers with another id
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

using nlohmann::json;

namespace {

json stage(const char *name, bool ok, const char *cls = nullptr, const std::string &msg = {}) {
  return {{"name", name},
          {"ok", ok},
          {"error_class", cls ? json(cls) : json(nullptr)},
          {"message", cls ? json(msg) : json(nullptr)},
          {"duration_ms", 0.1}};
}

} // namespace

int main() {
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto req = json::parse(line);
    const std::string src = req.at("module_source");
    std::string id = req.at("id");
    if (src.find("while True") != std::string::npos) {
      for (;;)
        std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    if (src.find("CRASH") != std::string::npos)
      std::_Exit(3);
    if (src.find("GARBAGE") != std::string::npos) {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    if (src.find("WRONGID") != std::string::npos)
      id += "-other";
    json stages = json::array();
    if (src.find("(:") != std::string::npos) {
      stages.push_back(stage("compile", false, "SyntaxError", "invalid syntax"));
    } else {
      stages.push_back(stage("compile", true));
      if (src.find("import nonexistent") != std::string::npos)
        stages.push_back(stage("import", false, "ModuleNotFoundError",
                               "No module named 'nonexistent'"));
      else if (src.find("undefined") != std::string::npos)
        stages.push_back(stage("import", false, "NameError",
                               "name 'undefined_name' is not defined"));
      else
        stages.push_back(stage("import", true));
    }
    std::cout << json{{"id", id}, {"stages", stages}, {"duration_ms", 0.2}}.dump() << "\n"
              << std::flush;
  }
}

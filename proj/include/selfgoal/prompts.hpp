#pragma once

#include <map>
#include <string>
#include <string_view>

namespace selfgoal::prompts {

// Instruction templates, shipped verbatim (including their original quirks of
// spelling and spacing). Placeholders use {name} syntax; unknown braces are
// left untouched so literal JSON examples inside templates survive rendering.

const std::string& main_goal_decomposition();
const std::string& subgoal_decomposition();
const std::string& search();
const std::string& task_solving();
const std::string& reflexion();
const std::string& clin();

std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars);

}  // namespace selfgoal::prompts

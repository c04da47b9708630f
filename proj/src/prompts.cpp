#include "selfgoal/prompts.hpp"

namespace selfgoal::prompts {

const std::string& main_goal_decomposition() {
    static const std::string tpl = R"tpl(# Main Goal
Humans exhibit numerous behaviors and sub-goals, which can be traced back to the primary aim of survival. For instance:
1. Food Acquisition: To maintain physical and mental functionality, individuals seek nourishment. They target foods with high energy and nutritional values to augment their health, thus enhancing survival possibilities.
2. Shelter Construction: Safe and secure housing is a fundamental human need. It offers protection from potentially harmful natural elements and potential threats.

{scene}

Taking analogy from human behaviors, if your fundamental objective in {task_noun} is "{goal}", what sub-goals you might have?)tpl";
    return tpl;
}

const std::string& subgoal_decomposition() {
    static const std::string tpl = R"tpl(Here's the current scenario:
{scene}
------------------------------
# Sub-Goal
For the goal: "{sub_goal}", can you further run some deduction for fine-grained goals or brief guidelines?)tpl";
    return tpl;
}

const std::string& search() {
    static const std::string tpl = R"tpl(Here's the current scenario:
{scene}
------------------------------
To better reach your main goal: {main_goal}, in this context, please do the following:
1.Evaluate how the sub-goals listed below can assist you in reaching your main goal given the present circumstances.
Sub-goals:
{guidance}
2. Select {width} most useful sub-goals that will help you reach your main goal in the current situation, and note their IDs.
Start by explaining your step-by-step thought process. Then, list the {width} IDs you've chosen, using the format of this example: {"IDs": [1, 3, 10, 21, 7]}.)tpl";
    return tpl;
}

const std::string& task_solving() {
    static const std::string tpl = R"tpl(Here is the current scenarios:

{scene}

------------------------------
Here are some possible subgoals and guidance derived from your primary objective {main_goal}:

{sub_goals}

In this round, You may target some of these subgoals and detailed guidance to improve your strategy and action, to achieve your primary objective.)tpl";
    return tpl;
}

const std::string& reflexion() {
    static const std::string tpl = R"tpl(You are an advanced reasoning agent that can improve based on self refection.
Review and reflect on the historical data provided from a past {session_noun}.
{past_auction_log}
Based on the {session_noun} log, in a few sentences, diagnose a possible reason for failure or phrasing discrepancy and devise a new, concise, high level plan that aims to mitigate the same failure. Use complete sentences.)tpl";
    return tpl;
}

const std::string& clin() {
    static const std::string tpl = R"tpl(Review and reflect on the historical data provided from a past {session_noun}.
{past_auction_log}
Here are your past learnings:
{past_learnings}
Based on the {session_noun} log, formulate or update your learning points that could be advantageous to your strategies in the future. Your learnings should be strategic, and of universal relevance and practical use for future {session_noun_plural}. Consolidate your learnings into a concise numbered list of sentences.
Each numbered item in the list can ONLY be of the form:
X MAY BE NECCESSARY to Y.
X SHOULD BE NECCESSARY to Y.
X MAY BE CONTRIBUTE to Y.
X DOES NOT CONTRIBUTE to Y.)tpl";
    return tpl;
}

std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] != '{') {
            out.push_back(tpl[i++]);
            continue;
        }
        std::size_t close = tpl.find('}', i + 1);
        if (close == std::string_view::npos) {
            out.append(tpl.substr(i));
            break;
        }
        std::string key(tpl.substr(i + 1, close - i - 1));
        auto it = vars.find(key);
        if (it != vars.end()) {
            out.append(it->second);
            i = close + 1;
        } else {
            // Not a placeholder (e.g. the literal {"IDs": ...} example).
            out.push_back(tpl[i++]);
        }
    }
    return out;
}

}  // namespace selfgoal::prompts

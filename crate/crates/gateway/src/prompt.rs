use serde::{Deserialize, Serialize};

use crate::api::{ChatRequest, Role, DISCLOSURE};

pub const DEFAULT_PREAMBLE: &str = "You are a supportive mental-health companion. You are an AI, not a \
human and not a licensed therapist, and you say so when asked. Respond with empathy and practical, \
evidence-based coping ideas. Never give instructions that could cause harm. Encourage professional \
help when problems are serious, and share crisis resources if the user may be in danger.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplate {
    pub preamble: String,
    pub user_tag: String,
    pub assistant_tag: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            preamble: DEFAULT_PREAMBLE.into(),
            user_tag: "User".into(),
            assistant_tag: "Assistant".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    /// History turns dropped to fit the cap.
    pub dropped_turns: usize,
}

impl PromptTemplate {
    fn tag(&self, role: Role) -> &str {
        match role {
            Role::User => &self.user_tag,
            Role::Assistant => &self.assistant_tag,
        }
    }

    fn system(&self) -> String {
        format!("<system>{} {}</system>\n", self.preamble, DISCLOSURE)
    }

    fn turn(&self, role: Role, content: &str) -> String {
        format!("{}: {}\n", self.tag(role), content.trim())
    }

    /// System block, then history, then the new message and an open
    /// assistant tag. Oldest user/assistant exchanges are dropped whole
    /// until the prompt fits `cap` characters. `None` when even the bare
    /// prompt without history is over the cap.
    pub fn render(&self, req: &ChatRequest, cap: usize) -> Option<RenderedPrompt> {
        let head = self.system();
        let tail = format!("{}{}:", self.turn(Role::User, &req.message), self.assistant_tag);
        let turns: Vec<String> = req.history.iter().map(|t| self.turn(t.role, &t.content)).collect();
        let fixed = head.chars().count() + tail.chars().count();
        if fixed > cap {
            return None;
        }
        let budget = cap - fixed;
        let mut keep = turns.len();
        let mut pairs: Vec<usize> = turns.chunks(2).map(|p| p.iter().map(|t| t.chars().count()).sum()).collect();
        let mut used: usize = pairs.iter().sum();
        while used > budget {
            let first = pairs.remove(0);
            used -= first;
            keep -= 2;
        }
        let start = turns.len() - keep;
        let mut text = head;
        for t in &turns[start..] {
            text.push_str(t);
        }
        text.push_str(&tail);
        Some(RenderedPrompt {
            text,
            dropped_turns: start,
        })
    }
}

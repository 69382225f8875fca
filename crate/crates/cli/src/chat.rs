use std::io::{BufRead, Write};

use dialog_core::adapt::select_response;
use dialog_core::corpus::LISTEN;
use dialog_core::nlu::predict_intent;
use dialog_core::policy::{DecisionTrace, PolicySession};

use crate::commands::Artifacts;
use crate::error::{CliError, Result};

/// Most actions the bot may take before it has to listen again.
const MAX_ACTIONS: usize = 5;

pub const HELP: &str = "commands: /trace toggles diagnostics, /intent NAME sends an intent directly (for moves and other non-verbal events), /reset starts over, /quit exits";

fn fmt_weights(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(" "))
}

struct Repl<'a, W: Write> {
    art: &'a Artifacts,
    session: PolicySession<'a>,
    trace: bool,
    out: W,
}

impl<W: Write> Repl<'_, W> {
    fn say(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| CliError::Internal(format!("writing transcript: {e}")))
    }

    /// Best template for `action` given what the user just said.
    fn realize(&mut self, action: &str, context: &str) -> Result<String> {
        let Some(cands) = self.art.domain.templates.get(action).filter(|c| !c.is_empty()) else {
            return Ok(format!("[{action}]"));
        };
        let Some(model) = &self.art.adapt else {
            return Ok(cands[0].clone());
        };
        let (best, scores) = select_response(&model.tree, context, cands)?;
        if self.trace {
            for (c, s) in cands.iter().zip(&scores) {
                self.say(&format!("  candidate {s:.3} {c}"))?;
            }
        }
        Ok(cands[best].clone())
    }

    fn show_decision(&mut self, d: &DecisionTrace) -> Result<()> {
        self.say(&format!("  action {} ({:.3})", d.predicted, d.similarity))?;
        let kinds = self.art.policy.config.fusion.map(|f| f.blocks()).unwrap_or_default();
        for (k, w) in kinds.iter().zip(&d.attention) {
            if !w.is_empty() {
                self.say(&format!("  attention {} {}", k.name(), fmt_weights(w)))?;
            }
        }
        if let Some(g) = d.copy_gate {
            self.say(&format!("  copy gate {g:.3} weights {}", fmt_weights(&d.copy_weights)))?;
        }
        Ok(())
    }

    fn turn(&mut self, intent: &str, context: &str) -> Result<()> {
        self.session.observe_user(intent)?;
        for d in self.session.respond(MAX_ACTIONS)? {
            if self.trace {
                self.show_decision(&d)?;
            }
            if d.predicted != LISTEN {
                let text = self.realize(&d.predicted, context)?;
                self.say(&format!("bot: {text}"))?;
            }
        }
        Ok(())
    }

    fn line(&mut self, raw: &str) -> Result<bool> {
        let text = raw.trim();
        if text.is_empty() {
            return Ok(true);
        }
        match text.split_once(' ').map_or((text, ""), |(a, b)| (a, b.trim())) {
            ("/quit", _) => {
                self.say("bye.")?;
                return Ok(false);
            }
            ("/trace", _) => {
                self.trace = !self.trace;
                let state = if self.trace { "on" } else { "off" };
                self.say(&format!("trace {state}"))?;
            }
            ("/help", _) => self.say(HELP)?,
            ("/reset", _) => {
                self.session = self.art.policy.session();
                self.say("conversation reset")?;
            }
            ("/intent", name) if !name.is_empty() => {
                if self.trace {
                    self.say(&format!("  intent {name} (direct)"))?;
                }
                self.turn(name, "")?;
            }
            (cmd, _) if cmd.starts_with('/') => self.say(&format!("unknown command {cmd}; {HELP}"))?,
            _ => {
                let ranked = predict_intent(&self.art.nlu, text)?;
                if self.trace {
                    for p in ranked.iter().take(3) {
                        self.say(&format!("  intent {} {:.3}", p.intent, p.similarity))?;
                    }
                }
                let intent = ranked.first().map(|p| p.intent.clone()).unwrap_or_default();
                self.turn(&intent, text)?;
            }
        }
        Ok(true)
    }
}

/// Reads user lines from `input` until `/quit` or end of input and writes
/// the bot side of the conversation to `out`.
pub fn run_chat<R: BufRead, W: Write>(art: &Artifacts, mut input: R, out: W) -> Result<()> {
    let mut repl = Repl {
        art,
        session: art.policy.session(),
        trace: false,
        out,
    };
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = input
            .read_until(b'\n', &mut buf)
            .map_err(|e| CliError::Usage(format!("reading input: {e}")))?;
        if n == 0 || !repl.line(&String::from_utf8_lossy(&buf))? {
            break;
        }
    }
    repl.out.flush().map_err(|e| CliError::Internal(e.to_string()))
}

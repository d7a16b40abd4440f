//! Extracting the chosen action from a free-text agent reply.

use alloc::string::String;

use crate::path::{Action, ActionSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no 'Final:' line in the response")]
    NoMarker,
    #[error("unrecognised action token {0:?}")]
    UnknownToken(String),
    #[error("action {action} is not legal; legal actions: {legal}")]
    IllegalChoice { action: Action, legal: ActionSet },
}

/// Reads the last line containing `Final:` (any case). The value is a digit
/// 0-3 or a direction name, optionally wrapped in markdown emphasis.
pub fn parse_action(response: &str, legal: ActionSet) -> Result<Action, ParseError> {
    const MARKER: &str = "final:";
    let value = response
        .lines()
        .rev()
        .find_map(|line| {
            let lower = line.to_ascii_lowercase();
            lower.rfind(MARKER).map(|at| String::from(&line[at + MARKER.len()..]))
        })
        .ok_or(ParseError::NoMarker)?;
    let token = value
        .trim_start_matches(|c: char| !c.is_ascii_alphanumeric())
        .split(|c: char| !c.is_ascii_alphanumeric())
        .next()
        .unwrap_or("");
    let action = match token.as_bytes() {
        [d @ b'0'..=b'3'] => Action::from_digit(d - b'0'),
        _ => Action::from_name(token),
    }
    .ok_or_else(|| ParseError::UnknownToken(String::from(value.trim())))?;
    if legal.contains(action) {
        Ok(action)
    } else {
        Err(ParseError::IllegalChoice { action, legal })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(actions: &[Action]) -> ActionSet {
        actions.iter().copied().collect()
    }

    #[test]
    fn digit_marker() {
        let legal = set(&[Action::Up, Action::Down]);
        assert_eq!(parse_action("I'll head down.\nFinal: 3", legal), Ok(Action::Down));
    }

    #[test]
    fn direction_name_any_case() {
        let legal = set(&[Action::Right]);
        assert_eq!(parse_action("Final: right", legal), Ok(Action::Right));
        assert_eq!(parse_action("**FINAL:** RIGHT.", legal), Ok(Action::Right));
    }

    #[test]
    fn last_marker_wins() {
        let legal = set(&[Action::Up, Action::Down]);
        assert_eq!(parse_action("Final: 1\nno wait\nFinal: 3", legal), Ok(Action::Down));
    }

    #[test]
    fn errors() {
        let legal = set(&[Action::Up]);
        assert_eq!(parse_action("I think down", legal), Err(ParseError::NoMarker));
        assert!(matches!(parse_action("Final: sideways", legal), Err(ParseError::UnknownToken(_))));
        assert!(matches!(parse_action("Final: 7", legal), Err(ParseError::UnknownToken(_))));
        assert_eq!(
            parse_action("Final: 0", legal),
            Err(ParseError::IllegalChoice { action: Action::Right, legal })
        );
    }
}

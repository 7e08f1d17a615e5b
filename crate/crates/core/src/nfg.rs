//! Strategic-form `.nfg` files, payoff-list flavour.
//!
//! ```text
//! NFG 1 R "title"
//! { "A" "B" } { 3 3 }
//!
//! u_A(1,1) u_B(1,1) u_A(2,1) u_B(2,1) ...
//! ```
//!
//! Payoff vectors are listed with the first player's strategy varying
//! fastest.

use std::fmt::Write as _;

use thiserror::Error;

use crate::equilibrium::NormalFormGame;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NfgError {
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error("expected {expected}, found `{found}`")]
    Unexpected { expected: &'static str, found: String },
    #[error("unterminated string")]
    UnterminatedString,
    #[error("expected {expected} payoff values, found {found}")]
    PayoffCount { expected: usize, found: usize },
}

/// A parsed strategic-form game.
#[derive(Debug, Clone, PartialEq)]
pub struct NfgGame {
    pub title: String,
    pub players: Vec<String>,
    pub strategy_counts: Vec<usize>,
    /// One payoff vector per profile, in file order (first player fastest).
    pub payoffs: Vec<Vec<f64>>,
}

impl NfgGame {
    /// File position of a profile.
    pub fn position(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strategy_counts)
            .rev()
            .fold(0, |acc, (&s, &n)| acc * n + s)
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> f64 {
        self.payoffs[self.position(profile)][player]
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Writes the game; infeasible cells carry their sentinel payoffs.
pub fn export_nfg(game: &NormalFormGame, title: &str) -> String {
    let players: Vec<String> = game.agents.iter().map(|a| quote(a)).collect();
    let counts: Vec<String> = game.shape().iter().map(|n| n.to_string()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "NFG 1 R {}", quote(title));
    let _ = writeln!(out, "{{ {} }} {{ {} }}", players.join(" "), counts.join(" "));
    out.push('\n');

    let shape = game.shape();
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total * shape.len());
    let mut profile = vec![0; shape.len()];
    for _ in 0..total {
        values.extend(game.cell(&profile).payoffs.iter().map(|p| p.to_string()));
        // Odometer with the first player as the fastest digit.
        for (slot, &n) in profile.iter_mut().zip(&shape) {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    let _ = writeln!(out, "{}", values.join(" "));
    out
}

#[derive(Debug, PartialEq)]
enum Token {
    Word(String),
    Str(String),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>, NfgError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' => {
                chars.next();
                tokens.push(Token::Open);
            }
            '}' => {
                chars.next();
                tokens.push(Token::Close);
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(NfgError::UnterminatedString),
                        Some('\\') => match chars.next() {
                            Some(e) => s.push(e),
                            None => return Err(NfgError::UnterminatedString),
                        },
                        Some('"') => break,
                        Some(ch) => s.push(ch),
                    }
                }
                tokens.push(Token::Str(s));
            }
            _ => {
                let mut w = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '{' || ch == '}' || ch == '"' {
                        break;
                    }
                    w.push(ch);
                    chars.next();
                }
                tokens.push(Token::Word(w));
            }
        }
    }
    Ok(tokens)
}

fn describe(t: &Token) -> String {
    match t {
        Token::Word(w) => w.clone(),
        Token::Str(s) => format!("\"{s}\""),
        Token::Open => "{".into(),
        Token::Close => "}".into(),
    }
}

fn parse_number(w: &str) -> Option<f64> {
    match w.split_once('/') {
        Some((n, d)) => Some(n.parse::<f64>().ok()? / d.parse::<f64>().ok()?),
        None => w.parse().ok(),
    }
}

type Tokens<'a> = std::iter::Peekable<std::slice::Iter<'a, Token>>;

fn expect_word(it: &mut Tokens, want: &'static str) -> Result<(), NfgError> {
    match it.next() {
        Some(Token::Word(w)) if w == want => Ok(()),
        Some(t) => Err(NfgError::Unexpected {
            expected: want,
            found: describe(t),
        }),
        None => Err(NfgError::Eof(want)),
    }
}

fn expect_open(it: &mut Tokens) -> Result<(), NfgError> {
    match it.next() {
        Some(Token::Open) => Ok(()),
        Some(t) => Err(NfgError::Unexpected {
            expected: "{",
            found: describe(t),
        }),
        None => Err(NfgError::Eof("{")),
    }
}

/// Reads the payoff-list flavour written by [`export_nfg`].
pub fn parse_nfg(text: &str) -> Result<NfgGame, NfgError> {
    let tokens = tokenize(text)?;
    let mut it = tokens.iter().peekable();
    expect_word(&mut it, "NFG")?;
    expect_word(&mut it, "1")?;
    expect_word(&mut it, "R")?;
    let title = match it.next() {
        Some(Token::Str(s)) => s.clone(),
        Some(t) => {
            return Err(NfgError::Unexpected {
                expected: "title string",
                found: describe(t),
            })
        }
        None => return Err(NfgError::Eof("title string")),
    };

    expect_open(&mut it)?;
    let mut players = Vec::new();
    loop {
        match it.next() {
            Some(Token::Str(s)) => players.push(s.clone()),
            Some(Token::Close) => break,
            Some(t) => {
                return Err(NfgError::Unexpected {
                    expected: "player name",
                    found: describe(t),
                })
            }
            None => return Err(NfgError::Eof("}")),
        }
    }
    expect_open(&mut it)?;
    let mut strategy_counts = Vec::new();
    loop {
        match it.next() {
            Some(Token::Word(w)) => match w.parse::<usize>() {
                Ok(n) => strategy_counts.push(n),
                Err(_) => {
                    return Err(NfgError::Unexpected {
                        expected: "strategy count",
                        found: w.clone(),
                    })
                }
            },
            Some(Token::Close) => break,
            Some(t) => {
                return Err(NfgError::Unexpected {
                    expected: "strategy count",
                    found: describe(t),
                })
            }
            None => return Err(NfgError::Eof("}")),
        }
    }
    // Optional comment string.
    if let Some(Token::Str(_)) = it.peek() {
        it.next();
    }

    let mut values = Vec::new();
    for t in it {
        match t {
            Token::Word(w) => values.push(parse_number(w).ok_or_else(|| NfgError::Unexpected {
                expected: "payoff value",
                found: w.clone(),
            })?),
            other => {
                return Err(NfgError::Unexpected {
                    expected: "payoff value",
                    found: describe(other),
                })
            }
        }
    }
    let n = players.len();
    let profiles: usize = strategy_counts.iter().product();
    if values.len() != profiles * n {
        return Err(NfgError::PayoffCount {
            expected: profiles * n,
            found: values.len(),
        });
    }
    Ok(NfgGame {
        title,
        players,
        strategy_counts,
        payoffs: values.chunks(n.max(1)).map(<[f64]>::to_vec).collect(),
    })
}

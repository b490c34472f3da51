// SPDX-License-Identifier: Apache-2.0

use super::ParseError;
use crate::Word;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(Word),
    // keywords
    Design,
    Inputs,
    If,
    Else,
    While,
    Output,
    Halt,
    In,
    NextInput,
    True,
    False,
    And,
    Or,
    Not,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Assign,
    Question,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Amp,
    Pipe,
    Caret,
    Tilde,
    Bang,
    Shl,
    Shr,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }

        let (start_line, start_col) = (line, col);
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            col += i - start;
            let parsed = if let Some(hex) = text.strip_prefix("0x").or(text.strip_prefix("0X")) {
                Word::from_str_radix(hex, 16)
            } else if let Some(bin) = text.strip_prefix("0b").or(text.strip_prefix("0B")) {
                Word::from_str_radix(bin, 2)
            } else {
                text.parse::<Word>()
            };
            let value = parsed.map_err(|_| {
                ParseError::syntax(
                    start_line,
                    start_col,
                    format!("integer literal `{text}` is not a 32-bit unsigned word"),
                )
            })?;
            out.push(Token {
                tok: Tok::Int(value),
                line: start_line,
                col: start_col,
            });
            continue;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match word.as_str() {
                "design" => Tok::Design,
                "inputs" => Tok::Inputs,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "output" => Tok::Output,
                "halt" => Tok::Halt,
                "in" => Tok::In,
                "next_input" => Tok::NextInput,
                "true" => Tok::True,
                "false" => Tok::False,
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                _ => Tok::Ident(word),
            };
            out.push(Token {
                tok,
                line: start_line,
                col: start_col,
            });
            continue;
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('<', Some('<')) => (Tok::Shl, 2),
                ('>', Some('>')) => (Tok::Shr, 2),
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('!', Some('=')) => (Tok::Ne, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('&', Some('&')) => (Tok::AndAnd, 2),
                ('|', Some('|')) => (Tok::OrOr, 2),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (';', _) => (Tok::Semi, 1),
                ('=', _) => (Tok::Assign, 1),
                ('?', _) => (Tok::Question, 1),
                (':', _) => (Tok::Colon, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('%', _) => (Tok::Percent, 1),
                ('&', _) => (Tok::Amp, 1),
                ('|', _) => (Tok::Pipe, 1),
                ('^', _) => (Tok::Caret, 1),
                ('~', _) => (Tok::Tilde, 1),
                ('!', _) => (Tok::Bang, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                _ => return Err(ParseError::syntax(line, col, format!("unexpected character `{c}`"))),
            };
            i += len;
            col += len;
            tok
        };
        out.push(Token {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_operators_and_literals() {
        assert_eq!(
            toks("a<<=0x10 // trailing\n>= !"),
            vec![
                Tok::Ident("a".into()),
                Tok::Shl,
                Tok::Assign,
                Tok::Int(16),
                Tok::Ge,
                Tok::Bang,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn rejects_oversized_literals() {
        let err = tokenize("x = 4294967296;").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, col: 5, .. }));
    }

    #[test]
    fn tracks_positions() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }
}

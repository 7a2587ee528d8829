use super::Document;

/// Splits one line of raw text into token strings.
pub trait Tokenizer {
    fn tokenize_line(&self, line: &str) -> Vec<String>;

    /// Tokenizes each newline-delimited line. No sentence segmentation.
    fn tokenize_document(&self, id: &str, raw_text: &str) -> Document {
        let lines: Vec<Vec<String>> = if raw_text.is_empty() {
            Vec::new()
        } else {
            raw_text
                .split('\n')
                .map(|l| self.tokenize_line(l))
                .collect()
        };
        Document::from_lines(id, &lines)
    }
}

/// Whitespace split, then every leading and trailing punctuation character
/// becomes its own token. Interior punctuation ("3.5", "w/c") is kept.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTokenizer;

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

impl Tokenizer for RuleTokenizer {
    fn tokenize_line(&self, line: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in line.split_whitespace() {
            let chars: Vec<char> = chunk.chars().collect();
            let lead = chars.iter().take_while(|&&c| is_punct(c)).count();
            if lead == chars.len() {
                out.extend(chars.iter().map(char::to_string));
                continue;
            }
            let trail = chars.iter().rev().take_while(|&&c| is_punct(c)).count();
            out.extend(chars[..lead].iter().map(char::to_string));
            out.push(chars[lead..chars.len() - trail].iter().collect());
            out.extend(chars[chars.len() - trail..].iter().map(char::to_string));
        }
        out
    }
}

/// Tokenizes raw text with the default [`RuleTokenizer`].
pub fn tokenize(id: &str, raw_text: &str) -> Document {
    RuleTokenizer.tokenize_document(id, raw_text)
}

//! Spoken numbers and clock times ("fifteen oh five").

use crate::world::TimeRef;

const UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 6] = ["", "", "twenty", "thirty", "forty", "fifty"];

/// Spells `n` for 0..=99.
pub fn number_word(n: u32) -> String {
    match n {
        0..=19 => UNITS[n as usize].to_string(),
        20..=99 if n % 10 == 0 => TENS[(n / 10) as usize].to_string(),
        20..=99 => format!("{} {}", TENS[(n / 10) as usize], UNITS[(n % 10) as usize]),
        _ => n.to_string(),
    }
}

fn unit_value(word: &str) -> Option<u32> {
    UNITS.iter().position(|w| *w == word).map(|i| i as u32)
}

fn tens_value(word: &str) -> Option<u32> {
    TENS.iter().position(|w| !w.is_empty() && *w == word).map(|i| i as u32 * 10)
}

/// Reads a number of one or two words starting at `tokens[0]`; returns the
/// value and the number of tokens consumed.
pub fn read_number(tokens: &[String]) -> Option<(u32, usize)> {
    let first = tokens.first()?;
    if let Some(v) = unit_value(first) {
        return Some((v, 1));
    }
    let tens = tens_value(first)?;
    match tokens.get(1).and_then(|w| unit_value(w)) {
        Some(u) if (1..=9).contains(&u) => Some((tens + u, 2)),
        _ => Some((tens, 1)),
    }
}

/// Whether `word` can start a spoken number.
pub fn is_number_word(word: &str) -> bool {
    unit_value(word).is_some() || tens_value(word).is_some()
}

/// Reads a spoken clock time: `<hour> oh <digit>`, `<hour> <minutes>` or
/// `<hour> hundred`.
pub fn read_time(tokens: &[String]) -> Option<(TimeRef, usize)> {
    let (hour, mut used) = read_number(tokens)?;
    let rest = &tokens[used..];
    let minute = match rest.first().map(String::as_str) {
        Some("oh") => {
            let digit = rest.get(1).and_then(|w| unit_value(w)).filter(|d| (1..=9).contains(d))?;
            used += 2;
            digit
        }
        Some("hundred") => {
            used += 1;
            0
        }
        Some(_) => match read_number(rest) {
            Some((m, n)) if m >= 10 => {
                used += n;
                m
            }
            _ => return None,
        },
        None => return None,
    };
    let time = TimeRef::new(u8::try_from(hour).ok()?, u8::try_from(minute).ok()?)?;
    Some((time, used))
}

/// Speaks a clock time the way the parser reads it.
pub fn time_words(t: TimeRef) -> String {
    let hour = number_word(t.hour as u32);
    match t.minute {
        0 => format!("{hour} hundred"),
        m @ 1..=9 => format!("{hour} oh {}", number_word(m as u32)),
        m => format!("{hour} {}", number_word(m as u32)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn reads_spoken_times() {
        assert_eq!(read_time(&toks("fifteen oh five")), Some((TimeRef::new(15, 5).unwrap(), 3)));
        assert_eq!(read_time(&toks("fifteen hundred")), Some((TimeRef::new(15, 0).unwrap(), 2)));
        assert_eq!(read_time(&toks("twenty three forty five")), Some((TimeRef::new(23, 45).unwrap(), 4)));
        assert_eq!(read_time(&toks("fifteen oh")), None);
        assert_eq!(read_time(&toks("twenty five oh one")), None);
    }

    #[test]
    fn every_time_round_trips() {
        for m in 0..24 * 60 {
            let t = TimeRef::from_minute_of_day(m);
            let spoken = toks(&time_words(t));
            assert_eq!(read_time(&spoken), Some((t, spoken.len())), "{t}");
        }
    }

    #[test]
    fn number_words() {
        assert_eq!(number_word(3), "three");
        assert_eq!(number_word(40), "forty");
        assert_eq!(number_word(42), "forty two");
        assert_eq!(read_number(&toks("forty two decks")), Some((42, 2)));
    }
}

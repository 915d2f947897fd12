//! Bundled sentence fixture.

/// Thirty short sentences over the recogniser alphabet, 10 to 21 characters each.
pub const SENTENCES: [&str; 30] = [
    "the dog ran home",
    "a cat sat down",
    "we like green tea",
    "she read a book",
    "open the window",
    "he lost his keys",
    "the sun is warm",
    "birds sing at dawn",
    "it's time to go",
    "my car is blue",
    "the bus was late",
    "keep the door shut",
    "they ate some rice",
    "rain fell all day",
    "close your eyes",
    "the milk is cold",
    "we walked to town",
    "a fox hid in grass",
    "turn off the light",
    "the boy can swim",
    "she plays piano",
    "fish swim in lakes",
    "our team won again",
    "bring me the cup",
    "the clock stopped",
    "snow covers the hill",
    "please sit down",
    "he drew a map",
    "the river is wide",
    "good night mother",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::Alphabet;

    #[test]
    fn fixture_is_well_formed() {
        let a = Alphabet::default();
        for s in SENTENCES {
            assert!((10..=21).contains(&s.len()), "{s}");
            a.encode(s).unwrap();
        }
        let mut sorted = SENTENCES.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
    }
}

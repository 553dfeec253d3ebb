use topiclink::corpus::tokenize;

#[test]
fn matches_hand_tokenized_table() {
    let input = include_str!("fixtures/tokenize_input.txt");
    let golden: Vec<&str> = include_str!("fixtures/tokenize_golden.txt")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect();
    let lines: Vec<&str> = input.lines().collect();
    assert_eq!(lines.len(), golden.len());
    for (text, want) in lines.iter().zip(golden) {
        let want: Vec<&str> = want.split_whitespace().collect();
        assert_eq!(tokenize(text), want, "input {text:?}");
    }
}

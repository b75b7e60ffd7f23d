//! Read a CoNLL-U dependency parse, find the root word, align wordpiece
//! tokens onto the words, and build the step-shaped weight vector.
//!
//! ```bash
//! cargo run -p groundkit --example parse_query
//! ```

use groundkit::depparse::{align_subwords, parse_conllu, weight_vector, TokenAlignment};
use groundkit::heatmap::TokenInfo;

const QUERY_CONLLU: &str = "\
# text = women under pink umbrella
1\twomen\twoman\t_\t_\t_\t0\troot\t_\t_
2\tunder\tunder\t_\t_\t_\t1\tprep\t_\t_
3\tpink\tpink\t_\t_\t_\t4\tamod\t_\t_
4\tumbrella\tumbrella\t_\t_\t_\t2\tpobj\t_\t_
";

fn main() {
    let sentences = parse_conllu(QUERY_CONLLU).unwrap();
    let sentence = &sentences[0];
    println!("query: {}", sentence.forms().collect::<Vec<_>>().join(" "));
    for (i, tok) in sentence.tokens().iter().enumerate() {
        let head = if tok.head == 0 {
            "ROOT".to_string()
        } else {
            sentence.tokens()[tok.head - 1].form.clone()
        };
        println!(
            "  {:>2} {:<10} -> {:<10} ({})",
            i + 1,
            tok.form,
            head,
            tok.relation
        );
    }
    println!(
        "root word: `{}` (index {})\n",
        sentence.root_form(),
        sentence.root_index()
    );

    // the model tokenizer split `umbrella` and wrapped the sequence in
    // delimiters; align its tokens back onto the parsed words
    let model_tokens = vec![
        TokenInfo::special("[CLS]"),
        TokenInfo::word("women"),
        TokenInfo::word("under"),
        TokenInfo::word("pink"),
        TokenInfo::word("umbre"),
        TokenInfo::word("##lla"),
        TokenInfo::special("[SEP]"),
    ];
    let words: Vec<&str> = sentence.forms().collect();
    let alignment = align_subwords(&words, &model_tokens, "##").unwrap();
    println!("subword alignment:");
    for (tok, entry) in model_tokens.iter().zip(alignment.entries()) {
        match entry {
            TokenAlignment::Word(w) => println!("  {:<8} -> word {} `{}`", tok.text, w, words[*w]),
            TokenAlignment::Special => println!("  {:<8} -> delimiter (no weight)", tok.text),
        }
    }

    let weights = weight_vector(&alignment, sentence.root_index(), 0.16, false).unwrap();
    println!(
        "\nweights over non-delimiter tokens (1 up to the root word's last piece, alpha after):"
    );
    println!("  {:?}", weights.values());
    println!(
        "  root token index: {}, alpha: {}",
        weights.root_token(),
        weights.alpha()
    );
}

//! Seeded random state machines emitted as Verilog, with their edge lists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomFsm {
    pub states: usize,
    /// (from, to) over state indices, self edges included.
    pub edges: Vec<(usize, usize)>,
    pub text: String,
}

pub fn random_fsm(seed: u64, max_states: usize) -> RandomFsm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_states);
    let mut edges = Vec::new();
    let mut arms = String::new();
    for s in 0..n {
        let k = rng.gen_range(0..=3usize);
        let mut succ: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
        succ.dedup();
        arms.push_str(&format!("            S{s}: begin\n"));
        if succ.is_empty() {
            arms.push_str(&format!("                next = S{s};\n"));
            edges.push((s, s));
        } else {
            for (i, t) in succ.iter().enumerate() {
                let kw = if i == 0 { "if" } else { "else if" };
                if i + 1 == succ.len() {
                    if i == 0 {
                        arms.push_str(&format!("                next = S{t};\n"));
                    } else {
                        arms.push_str(&format!("                else next = S{t};\n"));
                    }
                } else {
                    arms.push_str(&format!("                {kw} (in{i}) next = S{t};\n"));
                }
                if !edges.contains(&(s, *t)) {
                    edges.push((s, *t));
                }
            }
        }
        arms.push_str("            end\n");
    }
    let params: Vec<String> = (0..n).map(|i| format!("S{i} = 3'b{:03b}", i)).collect();
    let text = format!(
        "module rnd (\n    input clk,\n    input reset,\n    input in0,\n    input in1,\n    input in2\n);\n\n\
parameter {};\n\nreg [2:0] state;\nreg [2:0] next;\n\n\
always @(posedge clk or posedge reset) begin\n    if (reset)\n        state <= S0;\n    else\n        state <= next;\nend\n\n\
always @(*) begin\n    case (state)\n{arms}            default: next = S0;\n    endcase\nend\nendmodule\n",
        params.join(", ")
    );
    RandomFsm { states: n, edges, text }
}

fn main() { println!("{}", pgtsim::placeholder()); }

fn main() {
    println!("fwan");
}

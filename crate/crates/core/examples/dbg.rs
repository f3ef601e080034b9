fn main() {
    let f = carpet_core::RationalMap::carpet_example();
    match carpet_core::elevator::normalize(&f, 1024) {
        Ok(ctx) => println!(
            "ok eps0={:.6} delta0={:.6} julia={} px={:.6} diamJ={:.4}",
            ctx.eps0, ctx.delta0, ctx.julia.len(), ctx.pixel_size, ctx.julia_diameter()
        ),
        Err(e) => println!("ERR {e:?}"),
    }
}

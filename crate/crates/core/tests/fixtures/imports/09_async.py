import asyncio


async def main(items, lock):
    async with lock:
        import contextlib
    async for item in items:
        from functools import partial
    await asyncio.sleep(0)

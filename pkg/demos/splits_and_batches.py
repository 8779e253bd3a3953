"""
Song splits, album splits, and the leakage they control
=======================================================

A song split holds out random songs per artist. An album split holds out
whole albums, which is the stricter protocol: production style is shared
within an album, so a song split lets the classifier cheat on it.
"""

from artistid.datasets import album_split, song_split
from artistid.ingest import DatasetManifest, TrackMeta

tracks = []
track_id = 0
for a in range(3):
    for s in range(10):
        tracks.append(TrackMeta(artist=f"artist_{a:02d}", album=f"album_{s % 3}",
                                title=f"song_{s:02d}", path=f"/x/{track_id}.wav",
                                track_id=track_id))
        track_id += 1
manifest = DatasetManifest(tracks)
print(f"{len(manifest.tracks)} tracks, {len(manifest.artists)} artists, 3 albums each")

split = song_split(manifest, seed=0)
print(f"\nsong split: train={len(split.train)} val={len(split.val)} test={len(split.test)}")
by_id = {t.track_id: t for t in manifest.tracks}
for artist in manifest.artists:
    n_test = sum(1 for t in split.test if by_id[t].artist == artist)
    n_val = sum(1 for t in split.val if by_id[t].artist == artist)
    print(f"  {artist}: {n_test} test songs, {n_val} val songs (10 percent, rounded up)")

split = album_split(manifest, seed=0)
print(f"\nalbum split: train={len(split.train)} val={len(split.val)} test={len(split.test)}")
test_albums = {(by_id[t].artist, by_id[t].album) for t in split.test}
print("  held-out test albums:")
for artist, album in sorted(test_albums):
    print(f"    {artist}/{album}")

# the same seed always produces the same split, so files written once can
# be reused across training runs and machines
again = album_split(manifest, seed=0)
print(f"\nsame seed reproduces the split: {again.test == split.test}")
